#include "bevdg/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "bevdg/hash.hpp"
#include "bevdg/rng.hpp"
#include "binio.hpp"

namespace bevdg {

namespace {

constexpr double kProbClamp = 1e-7;
constexpr char kCkptMagic[8] = {'B', 'E', 'V', 'D', 'G', 'C', 'K', 'P'};
constexpr std::uint32_t kCkptVersion = 1;

std::uint64_t theta_fingerprint(const std::vector<double>& theta) {
    return fnv1a(theta.data(), theta.size() * sizeof(double));
}

// 3x3 conv with zero padding 1. stride 2 halves even extents, stride 1 keeps them.
void conv_forward(const Tensor& in, const double* w, const double* b, int out_ch,
                  int k, int stride, Tensor& out) {
    int pad = k / 2;
    int oh = (in.height + 2 * pad - k) / stride + 1;
    int ow = (in.width + 2 * pad - k) / stride + 1;
    out = Tensor(out_ch, oh, ow);
    for (int oc = 0; oc < out_ch; ++oc) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = b[oc];
                for (int ic = 0; ic < in.channels; ++ic) {
                    const double* wp = w + ((static_cast<std::size_t>(oc) * in.channels + ic) * k) * k;
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= in.height) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= in.width) continue;
                            acc += wp[ky * k + kx] * in.at(ic, iy, ix);
                        }
                    }
                }
                out.at(oc, oy, ox) = acc;
            }
        }
    }
}

// Accumulates dW/dB and (when d_in != nullptr) the input gradient.
void conv_backward(const Tensor& in, const double* w, int out_ch, int k, int stride,
                   const Tensor& d_out, double* d_w, double* d_b, Tensor* d_in) {
    int pad = k / 2;
    if (d_in) *d_in = Tensor(in.channels, in.height, in.width);
    for (int oc = 0; oc < out_ch; ++oc) {
        for (int oy = 0; oy < d_out.height; ++oy) {
            for (int ox = 0; ox < d_out.width; ++ox) {
                double g = d_out.at(oc, oy, ox);
                if (g == 0.0) continue;
                d_b[oc] += g;
                for (int ic = 0; ic < in.channels; ++ic) {
                    const double* wp = w + ((static_cast<std::size_t>(oc) * in.channels + ic) * k) * k;
                    double* dwp = d_w + ((static_cast<std::size_t>(oc) * in.channels + ic) * k) * k;
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= in.height) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= in.width) continue;
                            dwp[ky * k + kx] += g * in.at(ic, iy, ix);
                            if (d_in) d_in->at(ic, iy, ix) += g * wp[ky * k + kx];
                        }
                    }
                }
            }
        }
    }
}

void relu_forward(const Tensor& pre, Tensor& act) {
    act = pre;
    for (double& v : act.v)
        if (v < 0.0) v = 0.0;
}

void relu_backward(const Tensor& pre, Tensor& d_act) {
    for (std::size_t i = 0; i < d_act.v.size(); ++i)
        if (pre.v[i] <= 0.0) d_act.v[i] = 0.0;
}

void upsample2x_forward(const Tensor& in, Tensor& out) {
    out = Tensor(in.channels, in.height * 2, in.width * 2);
    for (int c = 0; c < in.channels; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                out.at(c, y, x) = in.at(c, y / 2, x / 2);
}

void upsample2x_backward(const Tensor& d_out, Tensor& d_in) {
    d_in = Tensor(d_out.channels, d_out.height / 2, d_out.width / 2);
    for (int c = 0; c < d_out.channels; ++c)
        for (int y = 0; y < d_out.height; ++y)
            for (int x = 0; x < d_out.width; ++x)
                d_in.at(c, y / 2, x / 2) += d_out.at(c, y, x);
}

void check_trace(const ModelParams& params, const ForwardTrace& trace) {
    if (trace.params_fingerprint != theta_fingerprint(params.theta))
        throw InvalidArgument("backward: trace is stale (parameters changed since forward)");
}

// dL/dlogit per element. Clamped probabilities contribute zero gradient.
Tensor cross_entropy_logit_grad(const Tensor& probs, const SegMask& label) {
    Tensor d_logits(probs.channels, probs.height, probs.width);
    double inv_n = 1.0 / static_cast<double>(probs.v.size());
    for (int c = 0; c < probs.channels; ++c)
        for (int y = 0; y < probs.height; ++y)
            for (int x = 0; x < probs.width; ++x) {
                double p = probs.at(c, y, x);
                if (p <= kProbClamp || p >= 1.0 - kProbClamp) {
                    d_logits.at(c, y, x) = 0.0;
                    continue;
                }
                double yv = label.at(y, x, c) ? 1.0 : 0.0;
                double dL_dp = (-yv / p + (1.0 - yv) / (1.0 - p)) * inv_n;
                d_logits.at(c, y, x) = dL_dp * p * (1.0 - p);
            }
    return d_logits;
}

// Shared CE backward with an optional gradient injection into the pooled
// latent (the consistency-loss path).
std::vector<double> backward_impl(const ModelParams& params, const ForwardTrace& trace,
                                  const SegMask& label, const std::vector<double>* z_grad) {
    check_trace(params, trace);
    const ArchConfig& cfg = params.cfg;
    int k = cfg.kernel;
    if (label.height() != trace.in_h || label.width() != trace.in_w)
        throw InvalidArgument("backward: label dimensions disagree with trace");

    std::vector<double> grad(params.theta.size(), 0.0);
    auto gw = [&](int layer) { return grad.data() + params.layout[layer].weight_offset; };
    auto gb = [&](int layer) { return grad.data() + params.layout[layer].bias_offset; };

    // decoder
    Tensor d_logits = cross_entropy_logit_grad(trace.probs, label);
    Tensor d_up3;
    conv_backward(trace.up3, params.weights(3), cfg.num_classes, k, 1, d_logits,
                  gw(3), gb(3), &d_up3);
    Tensor d_act3;
    upsample2x_backward(d_up3, d_act3);
    relu_backward(trace.pre3, d_act3);
    Tensor d_up2;
    conv_backward(trace.up2, params.weights(2), cfg.dec1_channels, k, 1, d_act3,
                  gw(2), gb(2), &d_up2);
    Tensor d_fused;
    upsample2x_backward(d_up2, d_fused);

    if (z_grad) {
        // z is the spatial mean of the fused map
        double inv_hw = 1.0 / (static_cast<double>(d_fused.height) * d_fused.width);
        for (int c = 0; c < d_fused.channels; ++c) {
            double g = (*z_grad)[c] * inv_hw;
            for (int y = 0; y < d_fused.height; ++y)
                for (int x = 0; x < d_fused.width; ++x) d_fused.at(c, y, x) += g;
        }
    }

    // encoder, weight gradients summed over CAVs
    double inv_cavs = 1.0 / static_cast<double>(trace.n_cavs);
    for (int cav = 0; cav < trace.n_cavs; ++cav) {
        Tensor d_act2 = d_fused;
        for (double& v : d_act2.v) v *= inv_cavs;
        relu_backward(trace.pre2[cav], d_act2);
        Tensor d_act1;
        conv_backward(trace.act1[cav], params.weights(1), cfg.enc2_channels, k, 2, d_act2,
                      gw(1), gb(1), &d_act1);
        relu_backward(trace.pre1[cav], d_act1);
        conv_backward(trace.inputs[cav], params.weights(0), cfg.enc1_channels, k, 2, d_act1,
                      gw(0), gb(0), nullptr);
    }
    return grad;
}

} // namespace

std::uint64_t ArchConfig::hash() const {
    std::int32_t fields[6] = {input_channels, enc1_channels, enc2_channels,
                              dec1_channels, num_classes, kernel};
    return fnv1a(fields, sizeof(fields));
}

ModelParams make_params(const ArchConfig& cfg) {
    ModelParams p;
    p.cfg = cfg;
    int k = cfg.kernel;
    int chain[5] = {cfg.input_channels, cfg.enc1_channels, cfg.enc2_channels,
                    cfg.dec1_channels, cfg.num_classes};
    std::size_t offset = 0;
    for (int layer = 0; layer < 4; ++layer) {
        LayerSlice& s = p.layout[layer];
        s.in_ch = chain[layer];
        s.out_ch = chain[layer + 1];
        s.weight_offset = offset;
        s.weight_len = static_cast<std::size_t>(s.out_ch) * s.in_ch * k * k;
        offset += s.weight_len;
        s.bias_offset = offset;
        s.bias_len = static_cast<std::size_t>(s.out_ch);
        offset += s.bias_len;
        if (layer == 1) p.encoder_len = offset;
    }
    p.theta.assign(offset, 0.0);
    return p;
}

ModelParams init_params(const ArchConfig& cfg, std::uint64_t seed) {
    ModelParams p = make_params(cfg);
    Rng rng(seed);
    for (int layer = 0; layer < 4; ++layer) {
        const LayerSlice& s = p.layout[layer];
        double bound = std::sqrt(1.0 / (static_cast<double>(s.in_ch) * cfg.kernel * cfg.kernel));
        for (std::size_t i = 0; i < s.weight_len; ++i)
            p.theta[s.weight_offset + i] = rng.uniform(-bound, bound);
        // biases stay zero
    }
    return p;
}

std::pair<Tensor, ForwardTrace> forward(const ModelParams& params,
                                        const std::vector<Image>& cav_images) {
    if (cav_images.empty())
        throw InvalidArgument("forward: CAV image set is empty");
    const ArchConfig& cfg = params.cfg;
    int h = cav_images[0].height();
    int w = cav_images[0].width();
    for (const Image& img : cav_images)
        if (img.height() != h || img.width() != w || img.channels() != cfg.input_channels)
            throw InvalidArgument("forward: CAV images disagree on dimensions");
    if (h % 4 != 0 || w % 4 != 0 || h < 4 || w < 4)
        throw InvalidArgument("forward: input extents must be positive multiples of 4");

    ForwardTrace tr;
    tr.in_h = h;
    tr.in_w = w;
    tr.n_cavs = static_cast<int>(cav_images.size());
    tr.params_fingerprint = theta_fingerprint(params.theta);

    int k = cfg.kernel;
    int n = tr.n_cavs;
    tr.inputs.resize(n);
    tr.pre1.resize(n);
    tr.act1.resize(n);
    tr.pre2.resize(n);
    tr.act2.resize(n);
    for (int cav = 0; cav < n; ++cav) {
        Tensor& in = tr.inputs[cav];
        in = Tensor(cfg.input_channels, h, w);
        in.v = cav_images[cav].data(); // identical planar layout
        conv_forward(in, params.weights(0), params.biases(0), cfg.enc1_channels, k, 2,
                     tr.pre1[cav]);
        relu_forward(tr.pre1[cav], tr.act1[cav]);
        conv_forward(tr.act1[cav], params.weights(1), params.biases(1), cfg.enc2_channels,
                     k, 2, tr.pre2[cav]);
        relu_forward(tr.pre2[cav], tr.act2[cav]);
    }

    // Mean fusion. Summands are sorted per cell first so the result is
    // bitwise identical under any permutation of the CAV inputs.
    tr.fused = Tensor(cfg.enc2_channels, h / 4, w / 4);
    double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> cell(n);
    for (std::size_t i = 0; i < tr.fused.v.size(); ++i) {
        for (int cav = 0; cav < n; ++cav) cell[cav] = tr.act2[cav].v[i];
        std::sort(cell.begin(), cell.end());
        double acc = 0.0;
        for (double v : cell) acc += v;
        tr.fused.v[i] = acc * inv_n;
    }

    tr.z.assign(cfg.enc2_channels, 0.0);
    double inv_hw = 1.0 / (static_cast<double>(tr.fused.height) * tr.fused.width);
    for (int c = 0; c < tr.fused.channels; ++c) {
        double acc = 0.0;
        for (int y = 0; y < tr.fused.height; ++y)
            for (int x = 0; x < tr.fused.width; ++x) acc += tr.fused.at(c, y, x);
        tr.z[c] = acc * inv_hw;
    }

    upsample2x_forward(tr.fused, tr.up2);
    conv_forward(tr.up2, params.weights(2), params.biases(2), cfg.dec1_channels, k, 1,
                 tr.pre3);
    relu_forward(tr.pre3, tr.act3);
    upsample2x_forward(tr.act3, tr.up3);
    conv_forward(tr.up3, params.weights(3), params.biases(3), cfg.num_classes, k, 1,
                 tr.logits);

    tr.probs = Tensor(cfg.num_classes, h, w);
    for (std::size_t i = 0; i < tr.logits.v.size(); ++i)
        tr.probs.v[i] = 1.0 / (1.0 + std::exp(-tr.logits.v[i]));

    return {tr.probs, std::move(tr)};
}

double cross_entropy(const Tensor& pred, const SegMask& label) {
    if (pred.height != label.height() || pred.width != label.width() ||
        pred.channels != label.classes())
        throw InvalidArgument("cross_entropy: prediction/label dimensions disagree");
    double acc = 0.0;
    for (int c = 0; c < pred.channels; ++c)
        for (int y = 0; y < pred.height; ++y)
            for (int x = 0; x < pred.width; ++x) {
                double p = pred.at(c, y, x);
                if (p < kProbClamp) p = kProbClamp;
                if (p > 1.0 - kProbClamp) p = 1.0 - kProbClamp;
                double yv = label.at(y, x, c) ? 1.0 : 0.0;
                acc -= yv * std::log(p) + (1.0 - yv) * std::log(1.0 - p);
            }
    return acc / static_cast<double>(pred.v.size());
}

std::vector<double> backward(const ModelParams& params, const ForwardTrace& trace,
                             const SegMask& label) {
    return backward_impl(params, trace, label, nullptr);
}

std::vector<double> backward_with_consistency(const ModelParams& params,
                                              const ForwardTrace& trace_s,
                                              const ForwardTrace& trace_t,
                                              const SegMask& label_t, double beta,
                                              const KernelParams& kp) {
    if (beta == 0.0) return backward_impl(params, trace_t, label_t, nullptr);
    std::size_t d = trace_t.z.size();
    if (trace_s.z.size() != d)
        throw InvalidArgument("backward_with_consistency: latent dimensions disagree");

    FeatureBatch zs(1, d), zt(1, d);
    std::copy(trace_s.z.begin(), trace_s.z.end(), zs.rows.begin());
    std::copy(trace_t.z.begin(), trace_t.z.end(), zt.rows.begin());
    std::vector<double> zg = mmd2_grad(zs, zt, kp);
    for (double& g : zg) g *= beta;
    return backward_impl(params, trace_t, label_t, &zg);
}

ModelParams sgd_step(const ModelParams& params, const std::vector<double>& grad, double lr) {
    if (grad.size() != params.theta.size())
        throw InvalidArgument("sgd_step: gradient length disagrees with theta");
    for (double g : grad)
        if (!std::isfinite(g))
            throw InvalidArgument("sgd_step: non-finite gradient");
    ModelParams out = params;
    for (std::size_t i = 0; i < out.theta.size(); ++i)
        out.theta[i] = params.theta[i] - lr * grad[i];
    return out;
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open for writing: " + path);
    out.write(kCkptMagic, sizeof(kCkptMagic));
    binio::write_u32(out, kCkptVersion);
    binio::write_u64(out, params.cfg.hash());
    binio::write_u64(out, params.theta.size());
    for (double v : params.theta) binio::write_f64(out, v);
    if (!out)
        throw IoError("short write: " + path);
}

ModelParams load_checkpoint(const std::string& path, const ArchConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open for reading: " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw FormatError("checkpoint: bad magic: " + path);
    std::uint32_t version = binio::read_u32(in, "checkpoint " + path);
    if (version != kCkptVersion)
        throw FormatError("checkpoint: unsupported version: " + path);
    std::uint64_t arch_hash = binio::read_u64(in, "checkpoint " + path);
    if (arch_hash != cfg.hash())
        throw FormatError("checkpoint: architecture hash disagrees: " + path);
    std::uint64_t len = binio::read_u64(in, "checkpoint " + path);
    ModelParams p = make_params(cfg);
    if (len != p.theta.size())
        throw FormatError("checkpoint: theta length disagrees with architecture: " + path);
    for (double& v : p.theta) v = binio::read_f64(in, "checkpoint " + path);
    return p;
}

} // namespace bevdg
