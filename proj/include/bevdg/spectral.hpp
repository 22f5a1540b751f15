#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "bevdg/image.hpp"
#include "bevdg/rng.hpp"

namespace bevdg {

// Unshifted 2D DFT of an image, DC at (0,0). Forward transform is the plain
// unnormalized double sum; the inverse carries the 1/(HW) factor.
struct Spectrum {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::complex<double>> data; // planar, same layout as Image

    std::size_t idx(int u, int v, int c) const {
        return (static_cast<std::size_t>(c) * height + u) * width + v;
    }
    std::complex<double>& at(int u, int v, int c) { return data[idx(u, v, c)]; }
    const std::complex<double>& at(int u, int v, int c) const { return data[idx(u, v, c)]; }
};

// Modulus/argument split of a Spectrum. Zero bins get phase 0.
struct AmplitudePhase {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> amplitude; // >= 0
    std::vector<double> phase;     // in (-pi, pi]
};

// Low-frequency index set wrapped around DC: u in {-r_h..r_h} mod H,
// v in {-r_w..r_w} mod W with r = floor(ratio * dim). Symmetric under index
// negation, so swapped spectra of real images stay conjugate-symmetric.
class FreqMask {
public:
    FreqMask(double ratio, int height, int width);

    bool contains(int u, int v) const {
        int du = u < height_ - u ? u : height_ - u;
        int dv = v < width_ - v ? v : width_ - v;
        return du <= r_h_ && dv <= r_w_;
    }

    double ratio() const { return ratio_; }
    int height() const { return height_; }
    int width() const { return width_; }
    int half_extent_h() const { return r_h_; }
    int half_extent_w() const { return r_w_; }
    std::size_t member_count() const;

private:
    double ratio_;
    int height_;
    int width_;
    int r_h_;
    int r_w_;
};

// Forward DFT per channel: F(u,v,c) = sum_h sum_w x(h,w,c) e^{-2pi i(hu/H + wv/W)}.
// Radix-2 fast path for power-of-two extents, naive O(N^2) otherwise.
Spectrum fft2d(const Image& img);

// Inverse with 1/(HW) normalization; returns the real part. If
// max_imag_residue is non-null it receives the largest |Im| encountered,
// which should be ~0 for conjugate-symmetric spectra.
Image ifft2d(const Spectrum& spec, double* max_imag_residue = nullptr);

AmplitudePhase decompose(const Spectrum& spec);
Spectrum compose(const AmplitudePhase& ap);

FreqMask low_freq_mask(double ratio, int height, int width);

// Masked bins take the target amplitude, the rest keep the source.
// Rasters are planar H*W*channels, matching AmplitudePhase::amplitude.
std::vector<double> amp_swap(const std::vector<double>& a_src,
                             const std::vector<double>& a_tgt,
                             int channels, const FreqMask& mask);

// Full pipeline: FFT both images, swap low-frequency amplitude, recompose
// with the source phase, inverse transform, clamp to [0,1].
Image ampaug(const Image& src, const Image& tgt, double ratio);

struct AmpaugResult {
    Image augmented;         // clamped to [0,1]
    Image pre_clamp;         // real part before clamping
    double max_imag_residue; // |Im| of the inverse transform
};
AmpaugResult ampaug_detail(const Image& src, const Image& tgt, double ratio);

// Same pipeline with a precomputed target amplitude raster (bank entries).
Image ampaug_with_amplitude(const Image& src, const std::vector<double>& tgt_amplitude,
                            double ratio);

// Precomputed amplitude spectra of a uniform-dimension image set. Immutable
// after construction; sampling draws from a caller-supplied RNG.
//
// On-disk layout, all little-endian:
//   bytes 0..7   magic "BEVDGAMP"
//   u32          version (1)
//   u32 u32 u32  height, width, channels
//   u64          count
//   count * H*W*C float64 amplitude values, planar, entry-major
class AmplitudeBank {
public:
    explicit AmplitudeBank(const std::vector<Image>& images);

    static AmplitudeBank load(const std::string& path);
    void save(const std::string& path) const;

    std::size_t size() const { return entries_.size(); }
    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }

    const std::vector<double>& entry(std::size_t i) const { return entries_.at(i); }
    const std::vector<double>& sample(Rng& rng) const {
        return entries_[static_cast<std::size_t>(rng.uniform_index(entries_.size()))];
    }

private:
    AmplitudeBank() = default;
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<std::vector<double>> entries_;
};

} // namespace bevdg
