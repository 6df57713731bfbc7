#pragma once

// Analytic per-layer accounting of parameters and multiply-accumulates for a
// given input size. Modules describe themselves into a census; the metrics
// module turns it into a budget report.

#include <cstdint>
#include <string>
#include <vector>

namespace scanet {

struct LayerRecord {
    std::string name;
    std::string kind;
    int64_t params = 0;
    int64_t macs = 0;
    // Non-MAC arithmetic (bilinear sampling in deformable layers).
    int64_t extra_flops = 0;
    bool counted = true;
};

class LayerCensus {
public:
    void conv(const std::string& name, int64_t cin, int64_t cout, int64_t kernel, int64_t out_h, int64_t out_w,
              bool bias = true);
    // Scatter-style transposed convolution: every input pixel touches
    // cin * cout * k^2 weights.
    void transposed_conv(const std::string& name, int64_t cin, int64_t cout, int64_t kernel, int64_t in_h,
                         int64_t in_w, bool bias = true);
    // Kernel weights plus 8 flops per tap per input channel per location for
    // the bilinear sample. The offset predictor is recorded separately.
    void deform_conv(const std::string& name, int64_t cin, int64_t cout, int64_t kernel, int64_t out_h,
                     int64_t out_w, bool bias = true);
    // Gating products and attention blends: one MAC per element.
    void elementwise(const std::string& name, int64_t elements);
    void scalar_params(const std::string& name, int64_t count);
    // Layers whose arithmetic is not modelled (activations, pooling,
    // padding, resampling).
    void uncounted(const std::string& name, const std::string& kind);

    const std::vector<LayerRecord>& records() const noexcept { return records_; }
    int64_t params() const;
    int64_t macs() const;
    // 2 * MACs + extra flops.
    int64_t flops() const;
    std::vector<std::string> uncounted_layers() const;

private:
    std::vector<LayerRecord> records_;
};

}  // namespace scanet
