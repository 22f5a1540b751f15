#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bevdg/image.hpp"
#include "bevdg/mmd.hpp"

namespace bevdg {

// Dense (C,H,W) activation block, planar row-major like Image.
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w),
          v(static_cast<std::size_t>(c) * h * w, fill) {}

    std::size_t idx(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * height + y) * width + x;
    }
    double& at(int c, int y, int x) { return v[idx(c, y, x)]; }
    double at(int c, int y, int x) const { return v[idx(c, y, x)]; }
};

// Collaborative segmentation net: two stride-2 3x3 conv+relu encoder layers
// (3->8->16), elementwise-mean fusion across CAVs, and two upsample+conv
// decoder layers (16->8->classes) ending in per-class sigmoids. Input extents
// must be divisible by 4 so the decoder lands back on the input grid.
struct ArchConfig {
    int input_channels = 3;
    int enc1_channels = 8;
    int enc2_channels = 16;
    int dec1_channels = 8;
    int num_classes = 3;
    int kernel = 3;

    std::uint64_t hash() const;
    bool operator==(const ArchConfig&) const = default;
};

struct LayerSlice {
    std::size_t weight_offset = 0;
    std::size_t weight_len = 0;
    std::size_t bias_offset = 0;
    std::size_t bias_len = 0;
    int in_ch = 0;
    int out_ch = 0;
};

// Flat parameter vector with a slice layout per conv layer. Layers 0..1 are
// the encoder, 2..3 the decoder; encoder_len marks the theta partition.
struct ModelParams {
    ArchConfig cfg;
    std::vector<double> theta;
    std::array<LayerSlice, 4> layout{};
    std::size_t encoder_len = 0;

    const double* weights(int layer) const { return theta.data() + layout[layer].weight_offset; }
    const double* biases(int layer) const { return theta.data() + layout[layer].bias_offset; }
    double* weights(int layer) { return theta.data() + layout[layer].weight_offset; }
    double* biases(int layer) { return theta.data() + layout[layer].bias_offset; }
};

// Zero-initialized parameter vector with the layout filled in.
ModelParams make_params(const ArchConfig& cfg);

// Weights uniform in [-sqrt(1/fan_in), sqrt(1/fan_in)), biases zero.
ModelParams init_params(const ArchConfig& cfg, std::uint64_t seed);

// Everything the backward pass needs, cached by forward. The fingerprint ties
// the trace to the exact theta it was computed under.
struct ForwardTrace {
    int in_h = 0;
    int in_w = 0;
    int n_cavs = 0;
    std::uint64_t params_fingerprint = 0;

    std::vector<Tensor> inputs; // per CAV
    std::vector<Tensor> pre1, act1, pre2, act2;
    Tensor fused;
    std::vector<double> z; // pooled latent, d = enc2_channels

    Tensor up2, pre3, act3, up3, logits, probs;
};

// Multi-CAV forward pass; returns per-class probability raster + trace.
std::pair<Tensor, ForwardTrace> forward(const ModelParams& params,
                                        const std::vector<Image>& cav_images);

// Mean over pixels and classes of -[y log p + (1-y) log(1-p)], probabilities
// clamped to [1e-7, 1-1e-7].
double cross_entropy(const Tensor& pred, const SegMask& label);

// Analytic gradient of cross_entropy w.r.t. theta.
std::vector<double> backward(const ModelParams& params, const ForwardTrace& trace,
                             const SegMask& label);

// Gradient of CE(x_t) + beta * mmd2(z_s, z_t) w.r.t. the parameters the
// meta-test trace was computed under. trace_s only supplies the constant z_s;
// the MMD term backpropagates through the meta-test branch's pooled latent.
std::vector<double> backward_with_consistency(const ModelParams& params,
                                              const ForwardTrace& trace_s,
                                              const ForwardTrace& trace_t,
                                              const SegMask& label_t, double beta,
                                              const KernelParams& kp);

// theta - lr * grad. Rejects length mismatches and non-finite gradients.
ModelParams sgd_step(const ModelParams& params, const std::vector<double>& grad, double lr);

// Checkpoint: magic "BEVDGCKP", u32 version, u64 arch hash, u64 length,
// little-endian float64 theta.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path, const ArchConfig& cfg);

} // namespace bevdg
