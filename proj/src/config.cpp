#include "scanet/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "scanet/errors.hpp"

namespace scanet {
using json = nlohmann::json;
namespace {

// Reads known keys from an object and rejects the rest.
class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    template <class F>
    void nested(const char* key, F&& fn) {
        seen_.insert(key);
        if (j_.contains(key)) fn(j_.at(key), where_ + "." + key);
    }

    void finish() const {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key())) throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

json to_json(const AblationFlags& f) {
    return {{"use_agn", f.use_agn},
            {"use_sl1a", f.use_sl1a},
            {"use_scl", f.use_scl},
            {"use_perceptual", f.use_perceptual},
            {"use_msssim", f.use_msssim},
            {"use_adversarial", f.use_adversarial}};
}

void read(const json& j, const std::string& where, AblationFlags& f) {
    Reader r(j, where);
    r.get("use_agn", f.use_agn);
    r.get("use_sl1a", f.use_sl1a);
    r.get("use_scl", f.use_scl);
    r.get("use_perceptual", f.use_perceptual);
    r.get("use_msssim", f.use_msssim);
    r.get("use_adversarial", f.use_adversarial);
    r.finish();
}

}  // namespace

bool operator==(const AblationFlags& a, const AblationFlags& b) {
    return a.use_agn == b.use_agn && a.use_sl1a == b.use_sl1a && a.use_scl == b.use_scl &&
           a.use_perceptual == b.use_perceptual && a.use_msssim == b.use_msssim &&
           a.use_adversarial == b.use_adversarial;
}

AblationFlags ablation_preset(int row) {
    if (row < 1 || row > 7) throw InvalidArgument("ablation row must be in 1..7");
    AblationFlags f{false, false, false, false, false, false};
    f.use_agn = row >= 2;
    f.use_sl1a = row >= 3;
    f.use_scl = row >= 4;
    f.use_perceptual = row >= 5;
    f.use_msssim = row >= 6;
    f.use_adversarial = row >= 7;
    return f;
}

std::string ablation_label(int row) {
    switch (row) {
        case 1: return "SRN";
        case 2: return "AGN + SRN";
        case 3: return "SRN + AGN";
        default: return "SRN + AGN + SCL";
    }
}

void validate(const TrainConfig& c) {
    if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (c.max_steps < 0) throw ConfigError("max_steps must be >= 0");
    if (!(c.lr > 0) || !std::isfinite(c.lr)) throw ConfigError("lr must be > 0");
    if (c.batch < 1) throw ConfigError("batch must be >= 1");
    if (!(c.lr_decay > 0 && c.lr_decay <= 1)) throw ConfigError("lr_decay must be in (0,1]");
    if (c.lr_decay_period < 1) throw ConfigError("lr_decay_period must be >= 1");
    if (c.scales.empty()) throw ConfigError("scales must not be empty");
    for (double s : c.scales)
        if (!(s > 0 && s <= 1)) throw ConfigError("scales must lie in (0,1]");
    if (c.patch < 16) throw ConfigError("patch must be >= 16");
    if (c.patch % 4 != 0) throw ConfigError("patch must be a multiple of 4");
    if (c.stride < 1) throw ConfigError("stride must be >= 1");
    if (c.rotations.empty()) throw ConfigError("rotations must not be empty");
    for (int r : c.rotations)
        if (r != 0 && r != 90 && r != 180 && r != 270) throw ConfigError("rotations must be 0, 90, 180 or 270");
    if (c.max_pairs < 0) throw ConfigError("max_pairs must be >= 0");
    if (c.msssim_scales < 1 || c.msssim_scales > 5) throw ConfigError("msssim_scales must be in 1..5");
    if (c.sample_every < 0 || c.checkpoint_every < 0) throw ConfigError("sample/checkpoint intervals must be >= 0");
    if (c.flags.use_scl && !c.flags.use_agn) throw ConfigError("use_scl requires use_agn");
    if (c.flags.use_sl1a && !c.flags.use_agn) throw ConfigError("use_sl1a requires use_agn");
    try {
        validate(c.curriculum);
        validate(c.weights);
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
}

double learning_rate(const TrainConfig& cfg, int64_t epoch) {
    if (epoch < 0) throw InvalidArgument("learning_rate: negative epoch");
    return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch / cfg.lr_decay_period));
}

RunConfig resolve(RunConfig cfg) {
    cfg.model.use_agn = cfg.train.flags.use_agn;
    if (cfg.name.empty() || cfg.name.find('/') != std::string::npos) throw ConfigError("run name must be a plain name");
    validate(cfg.train);
    try {
        validate(cfg.model);
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

json to_json(const ModelConfig& m) {
    return {{"version", m.version},
            {"use_agn", m.use_agn},
            {"agn",
             {{"n_daus", m.agn.n_daus},
              {"channels", m.agn.channels},
              {"in_channels", m.agn.in_channels},
              {"dilations", m.agn.dilations},
              {"reduction", m.agn.reduction},
              {"per_channel_pixel_gate", m.agn.per_channel_pixel_gate}}},
            {"srn",
             {{"in_channels", m.srn.in_channels},
              {"stem_channels", m.srn.stem_channels},
              {"mid_channels", m.srn.mid_channels},
              {"base_channels", m.srn.base_channels},
              {"n_res_blocks", m.srn.n_res_blocks},
              {"n_deform_layers", m.srn.n_deform_layers},
              {"downsample_factor", m.srn.downsample_factor},
              {"inject_input", m.srn.inject_input},
              {"inject_bottleneck", m.srn.inject_bottleneck}}}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig m;
    Reader r(j, "model");
    r.get("version", m.version);
    r.get("use_agn", m.use_agn);
    r.nested("agn", [&](const json& a, const std::string& w) {
        Reader ra(a, w);
        ra.get("n_daus", m.agn.n_daus);
        ra.get("channels", m.agn.channels);
        ra.get("in_channels", m.agn.in_channels);
        ra.get("dilations", m.agn.dilations);
        ra.get("reduction", m.agn.reduction);
        ra.get("per_channel_pixel_gate", m.agn.per_channel_pixel_gate);
        ra.finish();
    });
    r.nested("srn", [&](const json& s, const std::string& w) {
        Reader rs(s, w);
        rs.get("in_channels", m.srn.in_channels);
        rs.get("stem_channels", m.srn.stem_channels);
        rs.get("mid_channels", m.srn.mid_channels);
        rs.get("base_channels", m.srn.base_channels);
        rs.get("n_res_blocks", m.srn.n_res_blocks);
        rs.get("n_deform_layers", m.srn.n_deform_layers);
        rs.get("downsample_factor", m.srn.downsample_factor);
        rs.get("inject_input", m.srn.inject_input);
        rs.get("inject_bottleneck", m.srn.inject_bottleneck);
        rs.finish();
    });
    r.finish();
    return m;
}

json to_json(const TrainConfig& c) {
    json perceptual = {{"width1", c.perceptual.width1},
                       {"width2", c.perceptual.width2},
                       {"width3", c.perceptual.width3},
                       {"seed", c.perceptual.seed},
                       {"weights", c.perceptual.weights ? json(c.perceptual.weights->string()) : json(nullptr)}};
    return {{"epochs", c.epochs},
            {"max_steps", c.max_steps},
            {"lr", c.lr},
            {"batch", c.batch},
            {"lr_decay", c.lr_decay},
            {"lr_decay_period", c.lr_decay_period},
            {"scales", c.scales},
            {"patch", c.patch},
            {"stride", c.stride},
            {"rotations", c.rotations},
            {"hflip", c.hflip},
            {"seed", c.seed},
            {"max_pairs", c.max_pairs},
            {"flags", to_json(c.flags)},
            {"curriculum",
             {{"warmup_fraction", c.curriculum.warmup_fraction},
              {"loss_hi", c.curriculum.loss_hi},
              {"loss_lo", c.curriculum.loss_lo},
              {"use_ema", c.curriculum.use_ema},
              {"ema_decay", c.curriculum.ema_decay}}},
            {"weights",
             {{"sl1", c.weights.sl1},
              {"sl1_a", c.weights.sl1_a},
              {"perceptual", c.weights.perceptual},
              {"msssim", c.weights.msssim},
              {"adversarial", c.weights.adversarial}}},
            {"msssim_scales", c.msssim_scales},
            {"discriminator",
             {{"widths", c.discriminator.widths},
              {"leak", c.discriminator.leak},
              {"real_noise", c.discriminator.real_noise}}},
            {"perceptual", perceptual},
            {"sample_every", c.sample_every},
            {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    Reader r(j, "train");
    r.get("epochs", c.epochs);
    r.get("max_steps", c.max_steps);
    r.get("lr", c.lr);
    r.get("batch", c.batch);
    r.get("lr_decay", c.lr_decay);
    r.get("lr_decay_period", c.lr_decay_period);
    r.get("scales", c.scales);
    r.get("patch", c.patch);
    r.get("stride", c.stride);
    r.get("rotations", c.rotations);
    r.get("hflip", c.hflip);
    r.get("seed", c.seed);
    r.get("max_pairs", c.max_pairs);
    r.nested("flags", [&](const json& f, const std::string& w) { read(f, w, c.flags); });
    r.nested("curriculum", [&](const json& f, const std::string& w) {
        Reader rc(f, w);
        rc.get("warmup_fraction", c.curriculum.warmup_fraction);
        rc.get("loss_hi", c.curriculum.loss_hi);
        rc.get("loss_lo", c.curriculum.loss_lo);
        rc.get("use_ema", c.curriculum.use_ema);
        rc.get("ema_decay", c.curriculum.ema_decay);
        rc.finish();
    });
    r.nested("weights", [&](const json& f, const std::string& w) {
        Reader rw(f, w);
        rw.get("sl1", c.weights.sl1);
        rw.get("sl1_a", c.weights.sl1_a);
        rw.get("perceptual", c.weights.perceptual);
        rw.get("msssim", c.weights.msssim);
        rw.get("adversarial", c.weights.adversarial);
        rw.finish();
    });
    r.get("msssim_scales", c.msssim_scales);
    r.nested("discriminator", [&](const json& f, const std::string& w) {
        Reader rd(f, w);
        rd.get("widths", c.discriminator.widths);
        rd.get("leak", c.discriminator.leak);
        rd.get("real_noise", c.discriminator.real_noise);
        rd.finish();
    });
    r.nested("perceptual", [&](const json& f, const std::string& w) {
        Reader rp(f, w);
        rp.get("width1", c.perceptual.width1);
        rp.get("width2", c.perceptual.width2);
        rp.get("width3", c.perceptual.width3);
        rp.get("seed", c.perceptual.seed);
        json weights;
        rp.get("weights", weights);
        if (weights.is_string()) c.perceptual.weights = weights.get<std::string>();
        else if (!weights.is_null()) throw ConfigError(w + ".weights: expected a path or null");
        rp.finish();
    });
    r.get("sample_every", c.sample_every);
    r.get("checkpoint_every", c.checkpoint_every);
    r.finish();
    return c;
}

json to_json(const RunConfig& c) {
    return {{"name", c.name},
            {"data", c.data.string()},
            {"run_root", c.run_root.string()},
            {"model", to_json(c.model)},
            {"train", to_json(c.train)}};
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    Reader r(j, "config");
    r.get("name", c.name);
    std::string data, root = c.run_root.string();
    r.get("data", data);
    r.get("run_root", root);
    c.data = data;
    c.run_root = root;
    r.nested("model", [&](const json& m, const std::string&) { c.model = model_config_from_json(m); });
    r.nested("train", [&](const json& t, const std::string&) { c.train = train_config_from_json(t); });
    r.finish();
    return c;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError(path, "cannot write");
    out << j.dump(2) << '\n';
    if (!out) throw IoError(path, "write failed");
}

}  // namespace scanet
