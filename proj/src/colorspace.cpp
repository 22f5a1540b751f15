#include "bevdg/colorspace.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace bevdg {

namespace {

// RGB -> XYZ matrix, implemented verbatim. Its row sums (the image of white)
// double as the default reference white.
constexpr double kRgbToXyz[3][3] = {
    {0.4124, 0.3575, 0.1804},
    {0.2126, 0.7151, 0.0721},
    {0.0193, 0.1191, 0.9502},
};

struct Mat3 {
    double m[3][3];
};

Mat3 invert3(const double a[3][3]) {
    double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                 a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                 a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    Mat3 inv;
    inv.m[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
    inv.m[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
    inv.m[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
    inv.m[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
    inv.m[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
    inv.m[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
    inv.m[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
    inv.m[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
    inv.m[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
    return inv;
}

const Mat3& xyz_to_rgb_matrix() {
    static const Mat3 inv = invert3(kRgbToXyz);
    return inv;
}

constexpr double kLabDelta = 6.0 / 29.0; // piecewise threshold of f

double lab_f(double t) {
    if (t > kLabDelta * kLabDelta * kLabDelta) return std::cbrt(t);
    return t / (3.0 * kLabDelta * kLabDelta) + 4.0 / 29.0;
}

double lab_f_inv(double u) {
    if (u > kLabDelta) return u * u * u;
    return 3.0 * kLabDelta * kLabDelta * (u - 4.0 / 29.0);
}

// 17 significant digits round-trips any IEEE-754 double through strtod.
std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

WhitePoint default_white_point() {
    WhitePoint wp;
    for (int c = 0; c < 3; ++c) {
        double sum = kRgbToXyz[c][0] + kRgbToXyz[c][1] + kRgbToXyz[c][2];
        (c == 0 ? wp.Xn : c == 1 ? wp.Yn : wp.Zn) = sum;
    }
    return wp;
}

Image rgb_to_xyz(const Image& img) {
    if (img.channels() != 3)
        throw InvalidArgument("rgb_to_xyz: image must have 3 channels");
    Image xyz(img.height(), img.width(), 3);
    for (int h = 0; h < img.height(); ++h)
        for (int w = 0; w < img.width(); ++w) {
            double rgb[3];
            for (int c = 0; c < 3; ++c) rgb[c] = clamp01(img.at(h, w, c));
            for (int row = 0; row < 3; ++row)
                xyz.at(h, w, row) = kRgbToXyz[row][0] * rgb[0] +
                                    kRgbToXyz[row][1] * rgb[1] +
                                    kRgbToXyz[row][2] * rgb[2];
        }
    return xyz;
}

LabImage xyz_to_lab(const Image& xyz, const WhitePoint& wp) {
    if (xyz.channels() != 3)
        throw InvalidArgument("xyz_to_lab: raster must have 3 channels");
    if (!(wp.Xn > 0.0 && wp.Yn > 0.0 && wp.Zn > 0.0))
        throw InvalidArgument("xyz_to_lab: white point must be strictly positive");
    LabImage lab;
    lab.height = xyz.height();
    lab.width = xyz.width();
    lab.data.resize(xyz.size());
    for (int h = 0; h < xyz.height(); ++h)
        for (int w = 0; w < xyz.width(); ++w) {
            double fx = lab_f(xyz.at(h, w, 0) / wp.Xn);
            double fy = lab_f(xyz.at(h, w, 1) / wp.Yn);
            double fz = lab_f(xyz.at(h, w, 2) / wp.Zn);
            lab.at(h, w, 0) = 116.0 * fy - 16.0;
            lab.at(h, w, 1) = 500.0 * (fx - fy);
            lab.at(h, w, 2) = 200.0 * (fy - fz);
        }
    return lab;
}

Image lab_to_rgb(const LabImage& lab, const WhitePoint& wp) {
    if (!(wp.Xn > 0.0 && wp.Yn > 0.0 && wp.Zn > 0.0))
        throw InvalidArgument("lab_to_rgb: white point must be strictly positive");
    const Mat3& inv = xyz_to_rgb_matrix();
    Image out(lab.height, lab.width, 3);
    for (int h = 0; h < lab.height; ++h)
        for (int w = 0; w < lab.width; ++w) {
            double fy = (lab.at(h, w, 0) + 16.0) / 116.0;
            double fx = fy + lab.at(h, w, 1) / 500.0;
            double fz = fy - lab.at(h, w, 2) / 200.0;
            double xyz[3] = {wp.Xn * lab_f_inv(fx), wp.Yn * lab_f_inv(fy),
                             wp.Zn * lab_f_inv(fz)};
            for (int row = 0; row < 3; ++row) {
                double v = inv.m[row][0] * xyz[0] + inv.m[row][1] * xyz[1] +
                           inv.m[row][2] * xyz[2];
                out.at(h, w, row) = clamp01(v);
            }
        }
    return out;
}

LabStats compute_stats(const LabImage& lab) {
    std::int64_t n = static_cast<std::int64_t>(lab.height) * lab.width;
    if (n < 1)
        throw InvalidArgument("compute_stats: image has no pixels");
    LabStats st;
    st.pixel_count = n;
    std::size_t plane = static_cast<std::size_t>(lab.height) * lab.width;
    for (int ch = 0; ch < 3; ++ch) {
        const double* p = lab.data.data() + ch * plane;
        double mean = 0.0;
        for (std::size_t i = 0; i < plane; ++i) mean += p[i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            double d = p[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n); // population variance
        st.mu[ch] = mean;
        st.sigma[ch] = std::sqrt(var);
    }
    return st;
}

LabImage translate(const LabImage& src, const LabStats& src_stats, const LabStats& tgt_stats) {
    constexpr double kSigmaFloor = 1e-6;
    LabImage out = src;
    std::size_t plane = static_cast<std::size_t>(src.height) * src.width;
    for (int ch = 0; ch < 3; ++ch) {
        if (src_stats.mu[ch] == tgt_stats.mu[ch] &&
            src_stats.sigma[ch] == tgt_stats.sigma[ch])
            continue; // identity affine, keep the channel bitwise
        double scale = src_stats.sigma[ch] < kSigmaFloor
                           ? 1.0
                           : tgt_stats.sigma[ch] / src_stats.sigma[ch];
        double* p = out.data.data() + ch * plane;
        for (std::size_t i = 0; i < plane; ++i)
            p[i] = scale * (p[i] - src_stats.mu[ch]) + tgt_stats.mu[ch];
    }
    return out;
}

std::vector<Image> align_images(const Image& ego, const std::vector<Image>& others) {
    WhitePoint wp = default_white_point();
    LabStats ego_stats = compute_stats(rgb_to_lab(ego, wp));
    std::vector<Image> aligned;
    aligned.reserve(others.size());
    for (const Image& img : others) {
        LabImage lab = rgb_to_lab(img, wp);
        LabStats st = compute_stats(lab);
        aligned.push_back(lab_to_rgb(translate(lab, st, ego_stats), wp));
    }
    return aligned;
}

std::string encode_stats(const LabStats& stats) {
    for (double s : stats.sigma)
        if (s < 0.0) throw InvalidArgument("encode_stats: negative sigma");
    if (stats.pixel_count < 1)
        throw InvalidArgument("encode_stats: pixel_count must be >= 1");
    std::string msg = "{\"mu\":[";
    for (int i = 0; i < 3; ++i) msg += (i ? "," : "") + format_real(stats.mu[i]);
    msg += "],\"sigma\":[";
    for (int i = 0; i < 3; ++i) msg += (i ? "," : "") + format_real(stats.sigma[i]);
    msg += "],\"n\":" + std::to_string(stats.pixel_count) + "}";
    return msg;
}

LabStats decode_stats(const std::string& message) {
    nlohmann::json j = nlohmann::json::parse(message, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw FormatError("stats message: not a JSON object");
    if (!j.contains("mu") || !j.contains("sigma") || !j.contains("n"))
        throw FormatError("stats message: missing field");
    if (!j["mu"].is_array() || j["mu"].size() != 3 ||
        !j["sigma"].is_array() || j["sigma"].size() != 3 || !j["n"].is_number_integer())
        throw FormatError("stats message: malformed field");
    LabStats st;
    for (int i = 0; i < 3; ++i) {
        if (!j["mu"][i].is_number() || !j["sigma"][i].is_number())
            throw FormatError("stats message: non-numeric entry");
        st.mu[i] = j["mu"][i].get<double>();
        st.sigma[i] = j["sigma"][i].get<double>();
        if (st.sigma[i] < 0.0)
            throw FormatError("stats message: negative sigma");
    }
    st.pixel_count = j["n"].get<std::int64_t>();
    if (st.pixel_count < 1)
        throw FormatError("stats message: pixel count must be >= 1");
    return st;
}

} // namespace bevdg
