#include <doctest.h>

#include <fstream>
#include <iterator>

#include <torch/torch.h>

#include "scanet/checkpoint.hpp"
#include "scanet/config.hpp"
#include "scanet/errors.hpp"
#include "test_util.hpp"

using namespace scanet;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

struct Objects {
    Generator gen;
    PatchDiscriminator disc;
    torch::optim::Adam gopt, dopt;

    explicit Objects(const ModelConfig& m)
        : gen(m),
          disc(DiscriminatorConfig{}),
          gopt(gen->parameters(), torch::optim::AdamOptions(1e-3)),
          dopt(disc->parameters(), torch::optim::AdamOptions(1e-3)) {}

    TrainingObjects view() { return {gen.get(), disc.get(), &gopt, &dopt}; }

    void step() {
        gopt.zero_grad();
        gen->forward(torch::rand({1, 3, 32, 32})).dehazed.mean().backward();
        gopt.step();
        dopt.zero_grad();
        disc->forward(torch::rand({1, 3, 32, 32})).mean().backward();
        dopt.step();
    }
};

}  // namespace

TEST_SUITE("config-checkpoint") {
TEST_CASE("unknown keys are rejected") {
    CHECK_THROWS_AS(train_config_from_json(json{{"epochz", 3}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(json{{"train", {{"flags", {{"use_gan", true}}}}}}), ConfigError);
    CHECK_THROWS_AS(model_config_from_json(json{{"agn", {{"units", 3}}}}), ConfigError);
    try {
        train_config_from_json(json{{"epochz", 3}});
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("epochz") != std::string::npos);
    }
    CHECK_THROWS_AS(train_config_from_json(json{{"epochs", "many"}}), ConfigError);
}

TEST_CASE("missing keys keep defaults") {
    const auto t = train_config_from_json(json{{"epochs", 7}});
    CHECK(t.epochs == 7);
    CHECK(t.patch == TrainConfig{}.patch);
    CHECK(t.weights.msssim == 0.5);
}

TEST_CASE("JSON round trip") {
    RunConfig c;
    c.name = "rt";
    c.data = "/tmp/somewhere";
    c.train.epochs = 3;
    c.train.scales = {0.5, 1.0};
    c.train.rotations = {0, 180};
    c.train.flags = ablation_preset(4);
    c.train.curriculum.use_ema = true;
    c.train.perceptual.weights = "/tmp/vgg.pt";
    c.model.agn.n_daus = 2;
    const auto j = to_json(c);
    const auto back = run_config_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.train.flags == c.train.flags);
    CHECK(back.train.perceptual.weights->string() == "/tmp/vgg.pt");
    CHECK(back.model.agn.n_daus == 2);

    testing::TempDir dir("cfg");
    write_json(dir.path / "c.json", j);
    CHECK(read_json(dir.path / "c.json") == j);
    CHECK_THROWS(read_json(dir.path / "absent.json"));
}

TEST_CASE("learning-rate schedule") {
    TrainConfig t;
    t.lr = 1e-4;
    t.lr_decay = 0.5;
    t.lr_decay_period = 150;
    CHECK(learning_rate(t, 0) == 1e-4);
    CHECK(learning_rate(t, 149) == 1e-4);
    CHECK(learning_rate(t, 150) == 5e-5);
    CHECK(learning_rate(t, 300) == 2.5e-5);
}

TEST_CASE("ablation presets") {
    const auto r1 = ablation_preset(1);
    CHECK(!r1.use_agn);
    CHECK(!r1.use_sl1a);
    CHECK(!r1.use_scl);
    CHECK(!r1.use_perceptual);
    const auto r4 = ablation_preset(4);
    CHECK(r4.use_agn);
    CHECK(r4.use_sl1a);
    CHECK(r4.use_scl);
    CHECK(!r4.use_perceptual);
    CHECK(!r4.use_msssim);
    CHECK(!r4.use_adversarial);
    CHECK(ablation_preset(7) == AblationFlags{});
    CHECK_THROWS(ablation_preset(0));
    CHECK_THROWS(ablation_preset(8));
}

TEST_CASE("configuration validation") {
    TrainConfig t;
    t.patch = 30;
    CHECK_THROWS_AS(validate(t), ConfigError);
    t = TrainConfig{};
    t.flags.use_agn = false;
    CHECK_THROWS_AS(validate(t), ConfigError);
    t.flags = ablation_preset(1);
    CHECK_NOTHROW(validate(t));
    RunConfig r;
    r.train.flags = ablation_preset(1);
    CHECK(!resolve(r).model.use_agn);
}

TEST_CASE("save, load, save reproduces the bytes") {
    torch::manual_seed(0);
    RunConfig cfg;
    Objects a(cfg.model);
    a.step();
    testing::TempDir dir("ckpt");
    const TrainingState st{3, 17, 0.042};
    save_checkpoint(dir.path / "a.ckpt", a.view(), cfg, st);

    torch::manual_seed(99);
    Objects b(cfg.model);
    b.step();  // creates optimizer state to be overwritten
    const auto data = read_checkpoint(dir.path / "a.ckpt");
    restore(data, b.view());
    const auto st2 = checkpoint_state(data);
    CHECK(st2.epoch == 3);
    CHECK(st2.step == 17);
    CHECK(*st2.curriculum_ema == 0.042);
    save_checkpoint(dir.path / "b.ckpt", b.view(), checkpoint_config(data), st2);
    CHECK(slurp(dir.path / "a.ckpt") == slurp(dir.path / "b.ckpt"));

    torch::NoGradGuard ng;
    a.gen->eval();
    b.gen->eval();
    const auto x = torch::rand({1, 3, 24, 28});
    CHECK(torch::equal(a.gen->forward(x).dehazed, b.gen->forward(x).dehazed));

    auto loaded = load_generator(dir.path / "a.ckpt");
    CHECK(torch::equal(loaded->forward(x).dehazed, a.gen->forward(x).dehazed));
}

TEST_CASE("mismatched model is refused naming the entry") {
    RunConfig cfg;
    Objects a(cfg.model);
    testing::TempDir dir("ckpt_bad");
    save_checkpoint(dir.path / "a.ckpt", a.view(), cfg, {});
    ModelConfig other;
    other.srn.base_channels = 64;
    Objects b(other);
    try {
        restore(read_checkpoint(dir.path / "a.ckpt"), b.view());
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("srn.") != std::string::npos);
    }
}

TEST_CASE("unknown format versions are refused") {
    testing::TempDir dir("ckpt_ver");
    CheckpointData d;
    d.header = json{{"k", 1}};
    d.entries.push_back({"w", torch::arange(6, torch::kFloat).view({2, 3})});
    d.entries.push_back({"s", torch::full({1}, 7, torch::kLong)});
    write_checkpoint(dir.path / "d.ckpt", d);
    const auto back = read_checkpoint(dir.path / "d.ckpt");
    CHECK(back.header == d.header);
    REQUIRE(back.find("w"));
    CHECK(torch::equal(*back.find("w"), d.entries[0].second));
    CHECK(torch::equal(*back.find("s"), d.entries[1].second));
    CHECK(back.find("nope") == nullptr);

    auto bytes = slurp(dir.path / "d.ckpt");
    bytes[8] = 2;  // version field follows the 8-byte magic
    std::ofstream(dir.path / "v2.ckpt", std::ios::binary) << bytes;
    CHECK_THROWS_AS(read_checkpoint(dir.path / "v2.ckpt"), ConfigError);
    bytes[0] = 'X';
    std::ofstream(dir.path / "magic.ckpt", std::ios::binary) << bytes;
    CHECK_THROWS(read_checkpoint(dir.path / "magic.ckpt"));
}
}
