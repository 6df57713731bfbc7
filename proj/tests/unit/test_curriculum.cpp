#include <doctest.h>

#include <torch/torch.h>

#include "scanet/curriculum.hpp"
#include "scanet/errors.hpp"

using namespace scanet;
using doctest::Approx;

TEST_SUITE("curriculum") {
TEST_CASE("lambda boundary values") {
    CHECK(lambda_schedule(0.2, 0.1) == Approx(0.0).epsilon(1e-12));
    CHECK(lambda_schedule(0.05, 0.1) == Approx(1.0).epsilon(1e-12));
    CHECK(lambda_schedule(0.075, 0.1) == Approx(0.5).epsilon(1e-12));
    CHECK(lambda_schedule(0.5, 0.3) == 1.0);
    CHECK(lambda_schedule(0.1, 0.1) == Approx(0.0).epsilon(1e-12));
    CHECK(lambda_schedule(0.0, 0.0) == 1.0);
    // the window is inclusive of its end
    CHECK(lambda_schedule(0.5, 0.25) == 0.0);
}

TEST_CASE("lambda is monotone, bounded and continuous") {
    double prev = 1.0;
    for (int i = 0; i <= 3000; ++i) {
        const double l = i * 1e-4;
        const double v = lambda_schedule(l, 0.2);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(v <= prev + 1e-15);
        CHECK(std::abs(v - prev) <= 2e-3 + 1e-12);
        prev = v;
    }
}

TEST_CASE("lambda argument checks") {
    CHECK_THROWS_AS(lambda_schedule(-1e-3, 0.1), InvalidArgument);
    CurriculumConfig bad;
    bad.loss_lo = 0.2;
    CHECK_THROWS_AS(validate(bad), InvalidArgument);
    bad = CurriculumConfig{};
    bad.warmup_fraction = 0.0;
    CHECK_THROWS_AS(validate(bad), InvalidArgument);
    CurriculumState s;
    CHECK_THROWS_AS(s.update(-0.5, 0.0), InvalidArgument);
}

TEST_CASE("blend endpoints and midpoint") {
    torch::manual_seed(0);
    const auto g = torch::rand({2, 1, 5, 6}), t = torch::rand({2, 1, 5, 6});
    CHECK(torch::equal(blend_attention(g, t, 0.0), t));
    CHECK(torch::equal(blend_attention(g, t, 1.0), g));
    const auto mid = blend_attention(torch::full({1, 1, 3, 3}, 0.2), torch::full({1, 1, 3, 3}, 0.8), 0.5);
    CHECK((mid - 0.5).abs().max().item<double>() < 1e-6);
    const auto m = blend_attention(g, t, 0.3);
    CHECK((m >= torch::minimum(g, t) - 1e-7).all().item<bool>());
    CHECK((m <= torch::maximum(g, t) + 1e-7).all().item<bool>());
    CHECK_THROWS_AS(blend_attention(g, torch::rand({2, 1, 5, 5}), 0.5), InvalidArgument);
    CHECK_THROWS_AS(blend_attention(g, t, 1.5), InvalidArgument);
}

TEST_CASE("blend on attention maps") {
    AttentionMap g{Plane(2, 3, 0.2f)}, t{Plane(2, 3, 0.8f)};
    CHECK(blend_attention(g, t, 0.0).values.data == t.values.data);
    CHECK(blend_attention(g, t, 1.0).values.data == g.values.data);
    for (float v : blend_attention(g, t, 0.5).values.data) CHECK(v == Approx(0.5).epsilon(1e-6));
    CHECK_THROWS_AS(blend_attention(g, AttentionMap{Plane(3, 2)}, 0.5), InvalidArgument);
}

TEST_CASE("the ground-truth map carries no gradient") {
    auto g = torch::rand({1, 1, 4, 4}, torch::requires_grad());
    auto t = torch::rand({1, 1, 4, 4}, torch::requires_grad());
    blend_attention(g, t, 0.4).sum().backward();
    CHECK(g.grad().defined());
    CHECK((g.grad() - 0.4).abs().max().item<double>() < 1e-6);
    CHECK((!t.grad().defined() || t.grad().abs().sum().item<double>() == 0.0));
}

TEST_CASE("apply_attention identities") {
    torch::manual_seed(1);
    const auto f = torch::randn({2, 5, 4, 4});
    const auto m = torch::rand({2, 1, 4, 4});
    CHECK(torch::equal(apply_attention(f, m, torch::zeros({1})), f));
    CHECK((apply_attention(f, torch::ones({2, 1, 4, 4}), torch::full({1}, 0.37)) - f).abs().max().item<double>() <
          1e-6);
    CHECK(apply_attention(f, torch::zeros({2, 1, 4, 4}), torch::ones({1})).abs().max().item<double>() == 0.0);
    const auto per_channel = torch::rand({2, 5, 4, 4});
    const auto a = torch::full({1}, 0.25);
    CHECK((apply_attention(f, per_channel, a) - (0.75 * f + 0.25 * per_channel * f)).abs().max().item<double>() < 1e-6);
    CHECK_THROWS_AS(apply_attention(f, torch::rand({2, 1, 4, 3}), a), InvalidArgument);
    CHECK_THROWS_AS(apply_attention(f, torch::rand({2, 3, 4, 4}), a), InvalidArgument);
    CHECK_THROWS_AS(apply_attention(f, m, torch::ones({2})), InvalidArgument);
}

TEST_CASE("apply_attention passes gradient to features, map and alpha") {
    auto f = torch::randn({1, 3, 4, 4}, torch::requires_grad());
    auto m = torch::rand({1, 1, 4, 4}, torch::requires_grad());
    auto a = torch::full({1}, 0.5, torch::requires_grad());
    apply_attention(f, m, a).square().sum().backward();
    for (const auto* t : {&f, &m, &a}) {
        REQUIRE(t->grad().defined());
        CHECK(t->grad().abs().sum().item<double>() > 0);
    }
}

TEST_CASE("state tracks the last update") {
    CurriculumState s;
    CHECK(s.update(0.075, 0.1) == Approx(0.5));
    CHECK(s.lambda() == Approx(0.5));
    CHECK(s.attention_loss() == 0.075);
    CHECK(s.epoch_fraction() == 0.1);
    CHECK(!s.ema());
    CHECK(s.update(0.3, 0.9) == 1.0);
}

TEST_CASE("moving-average option smooths the driver") {
    CurriculumConfig cfg;
    cfg.use_ema = true;
    CurriculumState s(cfg);
    CHECK(s.update(0.2, 0.0) == 0.0);
    CHECK(*s.ema() == Approx(0.2));
    // 0.9 * 0.2 + 0.1 * 0.0 = 0.18: still above the upper threshold
    CHECK(s.update(0.0, 0.0) == 0.0);
    CHECK(*s.ema() == Approx(0.18));
    s.restore_ema(0.06);
    CHECK(s.update(0.06, 0.0) == Approx(0.8));
}
}
