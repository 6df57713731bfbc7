#include <doctest.h>

#include <random>

#include <torch/torch.h>

#include "scanet/attention_target.hpp"
#include "scanet/errors.hpp"

using namespace scanet;

namespace {

Image gray(int64_t h, int64_t w, float v) { return Image(h, w, v); }

Image rgb(int64_t h, int64_t w, float r, float g, float b) {
    Image img(h, w);
    for (auto& v : img.channel(0)) v = r;
    for (auto& v : img.channel(1)) v = g;
    for (auto& v : img.channel(2)) v = b;
    return img;
}

Image random_image(int64_t h, int64_t w, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> d(0.f, 1.f);
    Image img(h, w);
    for (auto& v : img.data) v = d(rng);
    return img;
}

}  // namespace

TEST_SUITE("attention-target") {
TEST_CASE("luma of primaries and extremes") {
    CHECK(rgb_to_y(gray(3, 3, 0.f)).data[0] == 0.f);
    CHECK(rgb_to_y(gray(3, 3, 1.f)).data[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(rgb_to_y(rgb(3, 3, 0, 1, 0)).data[4] == doctest::Approx(0.587).epsilon(1e-6));
    CHECK(rgb_to_y(rgb(2, 9, 1, 0, 0)).data[17] == doctest::Approx(0.299).epsilon(1e-6));
}

TEST_CASE("attention target examples") {
    for (float v : attention_target(gray(5, 5, .3f), gray(5, 5, .3f)).values.data) CHECK(v == 0.f);
    for (float v : attention_target(gray(5, 5, 1.f), gray(5, 5, 0.f)).values.data)
        CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
    for (float v : attention_target(gray(5, 5, .75f), gray(5, 5, .25f)).values.data)
        CHECK(v == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("shape mismatch is rejected") {
    CHECK_THROWS_AS(attention_target(gray(4, 5, 0), gray(5, 4, 0)), InvalidArgument);
    CHECK_THROWS_AS(rgb_to_y(torch::zeros({1, 2, 4, 4})), InvalidArgument);
    CHECK_THROWS_AS(attention_target(torch::zeros({1, 3, 4, 4}), torch::zeros({1, 3, 4, 5})), InvalidArgument);
}

TEST_CASE("symmetry, range and proportionality") {
    const auto a = random_image(17, 13, 1), b = random_image(17, 13, 2);
    const auto ab = attention_target(a, b), ba = attention_target(b, a);
    CHECK(ab.values.data == ba.values.data);
    for (float v : ab.values.data) CHECK((v >= 0.f && v <= 1.f));

    // doubling the gray-level gap doubles the map
    const auto m1 = attention_target(gray(4, 4, .5f), gray(4, 4, .4f)).values.data[0];
    const auto m2 = attention_target(gray(4, 4, .6f), gray(4, 4, .4f)).values.data[0];
    CHECK(m2 == doctest::Approx(2 * m1).epsilon(1e-5));
}

TEST_CASE("brightening mode keeps only increases") {
    const auto m = attention_target(gray(4, 4, .2f), gray(4, 4, .6f), DeviationMode::brightening);
    for (float v : m.values.data) CHECK(v == 0.f);
    const auto n = attention_target(gray(4, 4, .6f), gray(4, 4, .2f), DeviationMode::brightening);
    for (float v : n.values.data) CHECK(v == doctest::Approx(0.4).epsilon(1e-5));
}

TEST_CASE("tensor path matches the image path and carries no gradient") {
    const auto a = random_image(9, 11, 3), b = random_image(9, 11, 4);
    const auto ta = to_tensor(a).unsqueeze(0).requires_grad_(true), tb = to_tensor(b).unsqueeze(0);
    const auto m = attention_target(ta, tb);
    CHECK(!m.requires_grad());
    CHECK(m.sizes() == torch::IntArrayRef({1, 1, 9, 11}));
    const auto ref = attention_target(a, b);
    const auto mp = plane_from_tensor(m);
    for (std::size_t i = 0; i < ref.values.data.size(); ++i)
        CHECK(mp.data[i] == doctest::Approx(ref.values.data[i]).epsilon(1e-5));
}
}
