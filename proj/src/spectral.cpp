#include "bevdg/spectral.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "binio.hpp"
#include <numbers>

namespace bevdg {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place radix-2 Cooley-Tukey. sign = -1 forward, +1 inverse (no scaling).
void fft_pow2(cplx* a, int n, int sign) {
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        double ang = sign * 2.0 * kPi / len;
        cplx wlen(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (int k = 0; k < len / 2; ++k) {
                cplx u = a[i + k];
                cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

// O(N^2) fallback for non-power-of-two extents. Twiddles are indexed by
// (k*n mod N) so the angle argument stays small and accurate.
void dft_naive(cplx* a, int n, int sign) {
    std::vector<cplx> tw(n);
    for (int m = 0; m < n; ++m) {
        double ang = sign * 2.0 * kPi * m / n;
        tw[m] = cplx(std::cos(ang), std::sin(ang));
    }
    std::vector<cplx> out(n);
    for (int k = 0; k < n; ++k) {
        cplx acc(0.0, 0.0);
        for (int m = 0; m < n; ++m)
            acc += a[m] * tw[static_cast<int>((static_cast<long long>(k) * m) % n)];
        out[k] = acc;
    }
    std::copy(out.begin(), out.end(), a);
}

void fft_1d(cplx* a, int n, int sign) {
    if (n == 1) return;
    if (is_pow2(n))
        fft_pow2(a, n, sign);
    else
        dft_naive(a, n, sign);
}

// Rows then columns of one H*W plane, in place.
void fft_plane(cplx* plane, int h, int w, int sign) {
    for (int r = 0; r < h; ++r) fft_1d(plane + static_cast<std::size_t>(r) * w, w, sign);
    std::vector<cplx> col(h);
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) col[r] = plane[static_cast<std::size_t>(r) * w + c];
        fft_1d(col.data(), h, sign);
        for (int r = 0; r < h; ++r) plane[static_cast<std::size_t>(r) * w + c] = col[r];
    }
}

constexpr char kBankMagic[8] = {'B', 'E', 'V', 'D', 'G', 'A', 'M', 'P'};
constexpr std::uint32_t kBankVersion = 1;

} // namespace

Spectrum fft2d(const Image& img) {
    Spectrum spec;
    spec.height = img.height();
    spec.width = img.width();
    spec.channels = img.channels();
    spec.data.resize(img.size());
    std::size_t plane = static_cast<std::size_t>(img.height()) * img.width();
    for (int c = 0; c < img.channels(); ++c) {
        cplx* p = spec.data.data() + c * plane;
        const double* src = img.data().data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] = cplx(src[i], 0.0);
        fft_plane(p, img.height(), img.width(), -1);
    }
    return spec;
}

Image ifft2d(const Spectrum& spec, double* max_imag_residue) {
    std::size_t plane = static_cast<std::size_t>(spec.height) * spec.width;
    std::vector<cplx> buf(plane);
    Image img(spec.height, spec.width, spec.channels);
    double norm = 1.0 / (static_cast<double>(spec.height) * spec.width);
    double residue = 0.0;
    for (int c = 0; c < spec.channels; ++c) {
        std::copy(spec.data.begin() + c * plane, spec.data.begin() + (c + 1) * plane,
                  buf.begin());
        fft_plane(buf.data(), spec.height, spec.width, +1);
        double* dst = img.data().data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            dst[i] = buf[i].real() * norm;
            double im = std::abs(buf[i].imag() * norm);
            if (im > residue) residue = im;
        }
    }
    if (max_imag_residue) *max_imag_residue = residue;
    return img;
}

AmplitudePhase decompose(const Spectrum& spec) {
    AmplitudePhase ap;
    ap.height = spec.height;
    ap.width = spec.width;
    ap.channels = spec.channels;
    ap.amplitude.resize(spec.data.size());
    ap.phase.resize(spec.data.size());
    for (std::size_t i = 0; i < spec.data.size(); ++i) {
        const cplx& z = spec.data[i];
        ap.amplitude[i] = std::abs(z);
        ap.phase[i] = (z.real() == 0.0 && z.imag() == 0.0)
                          ? 0.0
                          : std::atan2(z.imag(), z.real());
    }
    return ap;
}

Spectrum compose(const AmplitudePhase& ap) {
    if (ap.amplitude.size() != ap.phase.size())
        throw InvalidArgument("compose: amplitude/phase size mismatch");
    Spectrum spec;
    spec.height = ap.height;
    spec.width = ap.width;
    spec.channels = ap.channels;
    spec.data.resize(ap.amplitude.size());
    for (std::size_t i = 0; i < spec.data.size(); ++i)
        spec.data[i] = cplx(ap.amplitude[i] * std::cos(ap.phase[i]),
                            ap.amplitude[i] * std::sin(ap.phase[i]));
    return spec;
}

FreqMask::FreqMask(double ratio, int height, int width)
    : ratio_(ratio), height_(height), width_(width) {
    if (!(ratio >= 0.0 && ratio < 1.0))
        throw InvalidArgument("FreqMask: ratio must be in [0,1)");
    if (height < 1 || width < 1)
        throw InvalidArgument("FreqMask: dimensions must be >= 1");
    r_h_ = static_cast<int>(std::floor(ratio * height));
    r_w_ = static_cast<int>(std::floor(ratio * width));
}

std::size_t FreqMask::member_count() const {
    auto covered = [](int r, int dim) {
        long long span = 2LL * r + 1;
        return static_cast<std::size_t>(span < dim ? span : dim);
    };
    return covered(r_h_, height_) * covered(r_w_, width_);
}

FreqMask low_freq_mask(double ratio, int height, int width) {
    return FreqMask(ratio, height, width);
}

std::vector<double> amp_swap(const std::vector<double>& a_src,
                             const std::vector<double>& a_tgt,
                             int channels, const FreqMask& mask) {
    std::size_t plane = static_cast<std::size_t>(mask.height()) * mask.width();
    if (a_src.size() != a_tgt.size() || a_src.size() != plane * channels)
        throw InvalidArgument("amp_swap: raster dimensions disagree");
    std::vector<double> out = a_src;
    for (int u = 0; u < mask.height(); ++u) {
        for (int v = 0; v < mask.width(); ++v) {
            if (!mask.contains(u, v)) continue;
            std::size_t base = static_cast<std::size_t>(u) * mask.width() + v;
            for (int c = 0; c < channels; ++c)
                out[base + c * plane] = a_tgt[base + c * plane];
        }
    }
    return out;
}

namespace {

AmpaugResult ampaug_impl(const Image& src, const std::vector<double>& tgt_amplitude,
                         double ratio) {
    Spectrum fs = fft2d(src);
    AmplitudePhase ap = decompose(fs);
    if (tgt_amplitude.size() != ap.amplitude.size())
        throw InvalidArgument("ampaug: source and target dimensions disagree");
    FreqMask mask = low_freq_mask(ratio, src.height(), src.width());
    ap.amplitude = amp_swap(ap.amplitude, tgt_amplitude, src.channels(), mask);

    AmpaugResult res;
    res.pre_clamp = ifft2d(compose(ap), &res.max_imag_residue);
    res.augmented = res.pre_clamp;
    for (double& v : res.augmented.data()) v = clamp01(v);
    return res;
}

} // namespace

AmpaugResult ampaug_detail(const Image& src, const Image& tgt, double ratio) {
    if (!src.same_dims(tgt))
        throw InvalidArgument("ampaug: source and target dimensions disagree");
    return ampaug_impl(src, decompose(fft2d(tgt)).amplitude, ratio);
}

Image ampaug(const Image& src, const Image& tgt, double ratio) {
    return ampaug_detail(src, tgt, ratio).augmented;
}

Image ampaug_with_amplitude(const Image& src, const std::vector<double>& tgt_amplitude,
                            double ratio) {
    return ampaug_impl(src, tgt_amplitude, ratio).augmented;
}

AmplitudeBank::AmplitudeBank(const std::vector<Image>& images) {
    if (images.empty())
        throw InvalidArgument("AmplitudeBank: image set is empty");
    height_ = images[0].height();
    width_ = images[0].width();
    channels_ = images[0].channels();
    entries_.reserve(images.size());
    for (const Image& img : images) {
        if (img.height() != height_ || img.width() != width_ || img.channels() != channels_)
            throw InvalidArgument("AmplitudeBank: mixed image dimensions");
        entries_.push_back(decompose(fft2d(img)).amplitude);
    }
}

void AmplitudeBank::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open for writing: " + path);
    out.write(kBankMagic, sizeof(kBankMagic));
    binio::write_u32(out, kBankVersion);
    binio::write_u32(out, static_cast<std::uint32_t>(height_));
    binio::write_u32(out, static_cast<std::uint32_t>(width_));
    binio::write_u32(out, static_cast<std::uint32_t>(channels_));
    binio::write_u64(out, entries_.size());
    for (const auto& e : entries_)
        for (double v : e) binio::write_f64(out, v);
    if (!out)
        throw IoError("short write: " + path);
}

AmplitudeBank AmplitudeBank::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open for reading: " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kBankMagic, 8) != 0)
        throw FormatError("amplitude bank: bad magic: " + path);
    std::uint32_t version = binio::read_u32(in, "amplitude bank " + path);
    if (version != kBankVersion)
        throw FormatError("amplitude bank: unsupported version " + std::to_string(version) +
                          ": " + path);
    AmplitudeBank bank;
    bank.height_ = static_cast<int>(binio::read_u32(in, "amplitude bank " + path));
    bank.width_ = static_cast<int>(binio::read_u32(in, "amplitude bank " + path));
    bank.channels_ = static_cast<int>(binio::read_u32(in, "amplitude bank " + path));
    std::uint64_t count = binio::read_u64(in, "amplitude bank " + path);
    if (bank.height_ < 1 || bank.width_ < 1 || bank.channels_ < 1 || count < 1)
        throw FormatError("amplitude bank: bad header fields: " + path);
    std::size_t entry_len =
        static_cast<std::size_t>(bank.height_) * bank.width_ * bank.channels_;
    bank.entries_.resize(count);
    for (auto& e : bank.entries_) {
        e.resize(entry_len);
        for (double& v : e) v = binio::read_f64(in, "amplitude bank " + path);
    }
    return bank;
}

} // namespace bevdg
