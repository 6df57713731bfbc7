#include <doctest.h>

#include <random>

#include <torch/torch.h>

#include "gradcheck.hpp"
#include "scanet/errors.hpp"
#include "scanet/model.hpp"
#include "scanet/srn.hpp"

using namespace scanet;

namespace {

void set_gates(AttentionGatesImpl& g, double v) {
    torch::NoGradGuard ng;
    g.input.fill_(v);
    g.bottleneck.fill_(v);
}

}  // namespace

TEST_SUITE("srn") {
TEST_CASE("encode quarters the padded size") {
    torch::manual_seed(0);
    SceneReconstruction srn(SRNConfig{});
    torch::NoGradGuard ng;
    CHECK(srn->encode(torch::rand({1, 3, 64, 64})).features.sizes() == torch::IntArrayRef({1, 128, 16, 16}));
    CHECK(srn->encode(torch::rand({1, 3, 100, 100})).features.sizes() == torch::IntArrayRef({1, 128, 25, 25}));
    const auto e = srn->encode(torch::rand({1, 3, 66, 66}));
    CHECK(e.features.sizes() == torch::IntArrayRef({1, 128, 17, 17}));
    CHECK(srn->decode(e.features, e.height, e.width).sizes() == torch::IntArrayRef({1, 3, 66, 66}));
}

TEST_CASE("decode restores resolution with values in [0,1]") {
    torch::manual_seed(1);
    SceneReconstruction srn(SRNConfig{});
    torch::NoGradGuard ng;
    const auto y = srn->decode(torch::randn({1, 128, 16, 16}) * 10);
    CHECK(y.sizes() == torch::IntArrayRef({1, 3, 64, 64}));
    CHECK(y.min().item<float>() >= 0.f);
    CHECK(y.max().item<float>() <= 1.f);
}

TEST_CASE("random sizes survive the pad/unpad round trip") {
    torch::manual_seed(2);
    SRNConfig cfg;
    cfg.stem_channels = 4;
    cfg.mid_channels = 8;
    cfg.base_channels = 8;
    cfg.n_res_blocks = 1;
    SceneReconstruction srn(cfg);
    std::mt19937 rng(3);
    std::uniform_int_distribution<int64_t> side(4, 41);
    torch::NoGradGuard ng;
    for (int i = 0; i < 12; ++i) {
        const int64_t h = side(rng), w = side(rng);
        CAPTURE(h);
        CAPTURE(w);
        CHECK(srn->forward(torch::rand({1, 3, h, w})).sizes() == torch::IntArrayRef({1, 3, h, w}));
    }
}

TEST_CASE("attention gating identities") {
    torch::manual_seed(4);
    SceneReconstruction srn(SRNConfig{});
    AttentionGates gates(true, true);
    CHECK(gates->input.item<double>() == 0.5);
    torch::NoGradGuard ng;
    const auto x = torch::rand({1, 3, 32, 36});
    const auto m = torch::rand({1, 1, 32, 36});
    const auto plain = srn->forward(x);

    set_gates(*gates, 0.0);
    CHECK(torch::equal(srn->forward(x, m, gates.get()), plain));

    set_gates(*gates, 0.7);
    const auto ones = srn->forward(x, torch::ones({1, 1, 32, 36}), gates.get());
    CHECK((ones - plain).abs().max().item<double>() < 1e-5);

    CHECK((srn->forward(x, m, gates.get()) - plain).abs().max().item<double>() > 0);
    CHECK_THROWS_AS(srn->forward(x, torch::rand({1, 1, 32, 32}), gates.get()), InvalidArgument);
    CHECK_THROWS_AS(srn->forward(x, m, nullptr), InvalidArgument);
}

TEST_CASE("an all-ones map is the identity in double precision") {
    torch::manual_seed(7);
    SceneReconstruction srn(SRNConfig{});
    AttentionGates gates(true, true);
    srn->to(torch::kDouble);
    gates->to(torch::kDouble);
    set_gates(*gates, 0.7);
    torch::NoGradGuard ng;
    const auto x = torch::rand({1, 3, 24, 20}, torch::kDouble);
    const auto d = srn->forward(x, torch::ones({1, 1, 24, 20}, torch::kDouble), gates.get()) - srn->forward(x);
    CHECK(d.abs().max().item<double>() < 1e-12);
}

TEST_CASE("tail block gradient matches finite differences") {
    torch::manual_seed(5);
    SRNConfig cfg;
    cfg.stem_channels = 4;
    cfg.mid_channels = 4;
    cfg.base_channels = 4;
    cfg.n_res_blocks = 1;
    SceneReconstruction srn(cfg);
    srn->to(torch::kDouble);
    const auto f = torch::randn({1, 4, 8, 8}, torch::kDouble) * 0.3;
    const auto proj = torch::randn({1, 3, 8, 8}, torch::kDouble);
    auto fn = [&](const std::vector<torch::Tensor>& in) { return (srn->tail_block(in[0]) * proj).sum(); };
    CHECK(scanet::testing::grad_rel_error(fn, {f}, 0) < 1e-3);
    CHECK(scanet::testing::param_grad_rel_error(*srn->tail, [&] { return (srn->tail_block(f) * proj).sum(); }) < 1e-3);
}

TEST_CASE("every generator parameter receives gradient") {
    torch::manual_seed(6);
    Generator g(ModelConfig{});
    const auto x = torch::rand({2, 3, 32, 32});
    const auto proj = torch::randn({2, 3, 32, 32});
    (g->forward(x).dehazed * proj).sum().backward();
    for (const auto& p : g->named_parameters()) {
        CAPTURE(p.key());
        REQUIRE(p.value().grad().defined());
        CHECK(p.value().grad().abs().sum().item<double>() > 0);
    }
}

TEST_CASE("generator without AGN has no attention parameters") {
    ModelConfig cfg;
    cfg.use_agn = false;
    Generator g(cfg);
    for (const auto& p : g->named_parameters()) CHECK(p.key().rfind("srn.", 0) == 0);
    torch::NoGradGuard ng;
    const auto out = g->forward(torch::rand({1, 3, 20, 24}));
    CHECK(out.dehazed.sizes() == torch::IntArrayRef({1, 3, 20, 24}));
    CHECK(!out.predicted_map.defined());
    CHECK_THROWS_AS(g->reconstruct(torch::rand({1, 3, 20, 24}), torch::rand({1, 1, 20, 24})), InvalidArgument);
}

TEST_CASE("checkpoint namespaces") {
    Generator g(ModelConfig{});
    bool agn = false, srn = false, alpha = false;
    for (const auto& p : g->named_parameters()) {
        agn |= p.key().rfind("agn.", 0) == 0;
        srn |= p.key().rfind("srn.", 0) == 0;
        alpha |= p.key() == "alpha.input" || p.key() == "alpha.bottleneck";
    }
    CHECK(agn);
    CHECK(srn);
    CHECK(alpha);
}

TEST_CASE("config validation") {
    SRNConfig c;
    c.n_res_blocks = 0;
    CHECK_THROWS_AS(validate(c), InvalidArgument);
    c = SRNConfig{};
    c.downsample_factor = 8;
    CHECK_THROWS_AS(validate(c), InvalidArgument);
    ModelConfig m;
    m.version = 99;
    CHECK_THROWS(validate(m));
}
}
