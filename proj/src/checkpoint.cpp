#include "scanet/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "scanet/errors.hpp"

namespace scanet {
using json = nlohmann::json;
namespace {

constexpr char kMagic[8] = {'S', 'C', 'A', 'N', 'E', 'T', 'C', 'K'};

enum class DType : std::uint8_t { f32 = 0, f64 = 1, i64 = 2 };

DType code_of(const torch::Tensor& t, const std::string& name) {
    switch (t.scalar_type()) {
        case torch::kFloat: return DType::f32;
        case torch::kDouble: return DType::f64;
        case torch::kLong: return DType::i64;
        default: throw InvalidArgument("checkpoint entry " + name + " has an unsupported dtype");
    }
}

torch::ScalarType type_of(DType d) {
    switch (d) {
        case DType::f32: return torch::kFloat;
        case DType::f64: return torch::kDouble;
        case DType::i64: return torch::kLong;
    }
    throw ConfigError("checkpoint: bad dtype code");
}

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::istream& in, const std::filesystem::path& path) {
    T v;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError(path, "truncated checkpoint");
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_string(std::istream& in, const std::filesystem::path& path) {
    const auto n = take<std::uint64_t>(in, path);
    if (n > (std::uint64_t{1} << 32)) throw IoError(path, "corrupt checkpoint string length");
    std::string s(n, '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw IoError(path, "truncated checkpoint");
    return s;
}

void add_module(CheckpointData& d, const std::string& prefix, const torch::nn::Module& m) {
    for (const auto& p : m.named_parameters()) d.entries.emplace_back(prefix + p.key(), p.value().detach());
    for (const auto& b : m.named_buffers()) d.entries.emplace_back(prefix + b.key(), b.value().detach());
}

void add_adam(CheckpointData& d, const std::string& prefix, const torch::nn::Module& m, torch::optim::Adam& opt) {
    auto& state = opt.state();
    for (const auto& p : m.named_parameters()) {
        auto it = state.find(p.value().unsafeGetTensorImpl());
        if (it == state.end()) continue;
        const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
        const auto base = prefix + p.key();
        d.entries.emplace_back(base + ".step", torch::tensor({s.step()}, torch::kLong));
        d.entries.emplace_back(base + ".exp_avg", s.exp_avg());
        d.entries.emplace_back(base + ".exp_avg_sq", s.exp_avg_sq());
    }
}

void copy_entry(const CheckpointData& d, const std::string& name, torch::Tensor& dst) {
    const auto* src = d.find(name);
    if (!src) throw ConfigError("checkpoint is missing entry " + name);
    if (src->sizes() != dst.sizes()) {
        std::ostringstream os;
        os << "checkpoint entry " << name << " has shape " << src->sizes() << " but the model expects "
           << dst.sizes();
        throw ConfigError(os.str());
    }
    torch::NoGradGuard ng;
    dst.copy_(*src);
}

void restore_module(const CheckpointData& d, const std::string& prefix, torch::nn::Module& m) {
    for (auto& p : m.named_parameters()) copy_entry(d, prefix + p.key(), p.value());
    for (auto& b : m.named_buffers()) copy_entry(d, prefix + b.key(), b.value());
}

void restore_adam(const CheckpointData& d, const std::string& prefix, torch::nn::Module& m, torch::optim::Adam& opt) {
    auto& state = opt.state();
    state.clear();
    for (auto& p : m.named_parameters()) {
        const auto base = prefix + p.key();
        const auto* step = d.find(base + ".step");
        if (!step) continue;
        auto s = std::make_unique<torch::optim::AdamParamState>();
        s->step(step->item<int64_t>());
        auto avg = torch::zeros_like(p.value()), sq = torch::zeros_like(p.value());
        copy_entry(d, base + ".exp_avg", avg);
        copy_entry(d, base + ".exp_avg_sq", sq);
        s->exp_avg(avg);
        s->exp_avg_sq(sq);
        state[p.value().unsafeGetTensorImpl()] = std::move(s);
    }
}

}  // namespace

const torch::Tensor* CheckpointData::find(const std::string& name) const {
    for (const auto& [n, t] : entries)
        if (n == name) return &t;
    return nullptr;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(tmp, "cannot write checkpoint");
        out.write(kMagic, sizeof kMagic);
        put<std::uint32_t>(out, kCheckpointVersion);
        put_string(out, data.header.dump());
        put<std::uint64_t>(out, data.entries.size());
        for (const auto& [name, tensor] : data.entries) {
            const auto t = tensor.detach().contiguous().cpu();
            put_string(out, name);
            put<std::uint8_t>(out, static_cast<std::uint8_t>(code_of(t, name)));
            put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
            for (auto s : t.sizes()) put<std::int64_t>(out, s);
            out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
        }
        if (!out) throw IoError(tmp, "checkpoint write failed");
    }
    std::filesystem::rename(tmp, path);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open checkpoint");
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw IoError(path, "not a checkpoint file");
    const auto version = take<std::uint32_t>(in, path);
    if (version != kCheckpointVersion)
        throw ConfigError("checkpoint " + path.string() + " has format version " + std::to_string(version) +
                          ", this build reads version " + std::to_string(kCheckpointVersion));
    CheckpointData d;
    try {
        d.header = json::parse(take_string(in, path));
    } catch (const json::exception& e) {
        throw IoError(path, std::string("corrupt checkpoint header (") + e.what() + ")");
    }
    const auto n = take<std::uint64_t>(in, path);
    for (std::uint64_t i = 0; i < n; ++i) {
        auto name = take_string(in, path);
        const auto code = take<std::uint8_t>(in, path);
        if (code > 2) throw IoError(path, "bad dtype in entry " + name);
        const auto ndim = take<std::uint32_t>(in, path);
        if (ndim > 8) throw IoError(path, "bad rank in entry " + name);
        std::vector<int64_t> shape(ndim);
        for (auto& s : shape) {
            s = take<std::int64_t>(in, path);
            if (s < 0) throw IoError(path, "bad shape in entry " + name);
        }
        auto t = torch::empty(shape, torch::TensorOptions().dtype(type_of(static_cast<DType>(code))));
        if (!in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes())))
            throw IoError(path, "truncated data in entry " + name);
        d.entries.emplace_back(std::move(name), std::move(t));
    }
    return d;
}

CheckpointData capture(const TrainingObjects& objs, const RunConfig& cfg, const TrainingState& state) {
    if (!objs.generator) throw InvalidArgument("capture: generator required");
    CheckpointData d;
    d.header = {{"config", to_json(cfg)},
                {"epoch", state.epoch},
                {"step", state.step},
                {"curriculum_ema", state.curriculum_ema ? json(*state.curriculum_ema) : json(nullptr)}};
    add_module(d, "", *objs.generator);
    if (objs.discriminator) add_module(d, "disc.", *objs.discriminator);
    if (objs.generator_optim) add_adam(d, "optim.gen.", *objs.generator, *objs.generator_optim);
    if (objs.discriminator && objs.discriminator_optim)
        add_adam(d, "optim.disc.", *objs.discriminator, *objs.discriminator_optim);
    return d;
}

void restore(const CheckpointData& data, const TrainingObjects& objs) {
    if (!objs.generator) throw InvalidArgument("restore: generator required");
    restore_module(data, "", *objs.generator);
    if (objs.discriminator) restore_module(data, "disc.", *objs.discriminator);
    if (objs.generator_optim) restore_adam(data, "optim.gen.", *objs.generator, *objs.generator_optim);
    if (objs.discriminator && objs.discriminator_optim)
        restore_adam(data, "optim.disc.", *objs.discriminator, *objs.discriminator_optim);
}

RunConfig checkpoint_config(const CheckpointData& data) {
    if (!data.header.contains("config")) throw ConfigError("checkpoint header has no config");
    return run_config_from_json(data.header.at("config"));
}

TrainingState checkpoint_state(const CheckpointData& data) {
    TrainingState s;
    s.epoch = data.header.value("epoch", int64_t{0});
    s.step = data.header.value("step", int64_t{0});
    if (data.header.contains("curriculum_ema") && data.header.at("curriculum_ema").is_number())
        s.curriculum_ema = data.header.at("curriculum_ema").get<double>();
    return s;
}

void save_checkpoint(const std::filesystem::path& path, const TrainingObjects& objs, const RunConfig& cfg,
                     const TrainingState& state) {
    write_checkpoint(path, capture(objs, cfg, state));
}

Generator load_generator(const std::filesystem::path& path) {
    const auto data = read_checkpoint(path);
    const auto cfg = checkpoint_config(data);
    Generator g(cfg.model);
    restore_module(data, "", *g);
    g->eval();
    return g;
}

}  // namespace scanet
