#include "scanet/layer_census.hpp"

namespace scanet {

void LayerCensus::conv(const std::string& name, int64_t cin, int64_t cout, int64_t kernel, int64_t out_h,
                       int64_t out_w, bool bias) {
    const int64_t w = cin * cout * kernel * kernel;
    records_.push_back({name, "conv", w + (bias ? cout : 0), w * out_h * out_w, 0, true});
}

void LayerCensus::transposed_conv(const std::string& name, int64_t cin, int64_t cout, int64_t kernel, int64_t in_h,
                                  int64_t in_w, bool bias) {
    const int64_t w = cin * cout * kernel * kernel;
    records_.push_back({name, "transposed_conv", w + (bias ? cout : 0), w * in_h * in_w, 0, true});
}

void LayerCensus::deform_conv(const std::string& name, int64_t cin, int64_t cout, int64_t kernel, int64_t out_h,
                              int64_t out_w, bool bias) {
    const int64_t taps = kernel * kernel;
    const int64_t w = cin * cout * taps;
    records_.push_back({name, "deform_conv", w + (bias ? cout : 0), w * out_h * out_w, 8 * taps * cin * out_h * out_w,
                        true});
}

void LayerCensus::elementwise(const std::string& name, int64_t elements) {
    records_.push_back({name, "elementwise", 0, elements, 0, true});
}

void LayerCensus::scalar_params(const std::string& name, int64_t count) {
    records_.push_back({name, "parameter", count, 0, 0, true});
}

void LayerCensus::uncounted(const std::string& name, const std::string& kind) {
    records_.push_back({name, kind, 0, 0, 0, false});
}

int64_t LayerCensus::params() const {
    int64_t s = 0;
    for (const auto& r : records_) s += r.params;
    return s;
}

int64_t LayerCensus::macs() const {
    int64_t s = 0;
    for (const auto& r : records_) s += r.macs;
    return s;
}

int64_t LayerCensus::flops() const {
    int64_t s = 0;
    for (const auto& r : records_) s += 2 * r.macs + r.extra_flops;
    return s;
}

std::vector<std::string> LayerCensus::uncounted_layers() const {
    std::vector<std::string> out;
    for (const auto& r : records_) {
        if (!r.counted) out.push_back(r.name + " (" + r.kind + ")");
    }
    return out;
}

}  // namespace scanet
