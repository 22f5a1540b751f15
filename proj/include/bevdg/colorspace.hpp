#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bevdg/image.hpp"

namespace bevdg {

// L in [0,100] for in-gamut inputs; a/b unbounded (typically [-128,127]).
struct LabImage {
    int height = 0;
    int width = 0;
    std::vector<double> data; // planar: L plane, a plane, b plane

    std::size_t idx(int h, int w, int ch) const {
        return (static_cast<std::size_t>(ch) * height + h) * width + w;
    }
    double& at(int h, int w, int ch) { return data[idx(h, w, ch)]; }
    double at(int h, int w, int ch) const { return data[idx(h, w, ch)]; }
};

struct WhitePoint {
    double Xn = 0.0;
    double Yn = 0.0;
    double Zn = 0.0;
};

// Reference white of the fixed RGB->XYZ matrix itself, i.e. the image of
// (1,1,1). Guarantees white maps to L=100 without importing an external
// illuminant constant.
WhitePoint default_white_point();

// Per-channel population statistics of a LAB image; the payload other CAVs
// receive from the ego during alignment.
struct LabStats {
    std::array<double, 3> mu{};    // mean of L, a, b
    std::array<double, 3> sigma{}; // population std dev, >= 0
    std::int64_t pixel_count = 0;

    bool operator==(const LabStats&) const = default;
};

// Fixed 3x3 matrix applied per pixel; linear RGB assumed, input clamped to
// [0,1] at this boundary. Output shares the Image container but is an XYZ
// raster, not display pixels.
Image rgb_to_xyz(const Image& img);

LabImage xyz_to_lab(const Image& xyz, const WhitePoint& wp);

// Inverse path; clamps to [0,1] on exit back into RGB.
Image lab_to_rgb(const LabImage& lab, const WhitePoint& wp);

inline LabImage rgb_to_lab(const Image& img, const WhitePoint& wp) {
    return xyz_to_lab(rgb_to_xyz(img), wp);
}

LabStats compute_stats(const LabImage& lab);

// Channel-wise affine map onto the target statistics. A source channel with
// sigma below 1e-6 is shifted only (no rescale), so flat channels stay flat.
LabImage translate(const LabImage& src, const LabStats& src_stats, const LabStats& tgt_stats);

// Stats-sharing protocol: the ego's LAB statistics are computed once and each
// other image is translated toward them. Returns the aligned others; the ego
// image itself is never modified.
std::vector<Image> align_images(const Image& ego, const std::vector<Image>& others);

// Canonical wire form: {"mu":[...],"sigma":[...],"n":N} with reals printed at
// 17 significant digits so decode(encode(s)) is bitwise exact.
std::string encode_stats(const LabStats& stats);
LabStats decode_stats(const std::string& message);

} // namespace bevdg
