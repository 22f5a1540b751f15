#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bevdg/errors.hpp"

namespace bevdg {

// Planar real-valued raster. Values live in [0,1] semantically; out-of-range
// values may exist between operations but are clamped at every file-I/O and
// color-conversion boundary. Layout is planar row-major: index (c,h,w) maps
// to c*H*W + h*W + w.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }

    double& at(int h, int w, int c) { return data_[idx(h, w, c)]; }
    double at(int h, int w, int c) const { return data_[idx(h, w, c)]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_dims(const Image& other) const {
        return height_ == other.height_ && width_ == other.width_ &&
               channels_ == other.channels_;
    }

    std::size_t idx(int h, int w, int c) const {
        return (static_cast<std::size_t>(c) * height_ + h) * width_ + w;
    }

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

// Per-class binary occupancy masks sharing the Image layout. Classes are
// independent: a pixel may be both road and lane.
class SegMask {
public:
    static constexpr int kNumClasses = 3;
    enum Class { kVehicle = 0, kRoad = 1, kLane = 2 };

    SegMask() = default;
    SegMask(int height, int width);

    int height() const { return height_; }
    int width() const { return width_; }
    int classes() const { return kNumClasses; }

    std::uint8_t& at(int h, int w, int cls) { return data_[idx(h, w, cls)]; }
    std::uint8_t at(int h, int w, int cls) const { return data_[idx(h, w, cls)]; }

    std::vector<std::uint8_t>& data() { return data_; }
    const std::vector<std::uint8_t>& data() const { return data_; }

    bool operator==(const SegMask& other) const = default;

    std::size_t idx(int h, int w, int cls) const {
        return (static_cast<std::size_t>(cls) * height_ + h) * width_ + w;
    }

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> data_;
};

// Binary P6 PPM, maxval 255. Stored byte v maps to v/255.
Image load_ppm(const std::string& path);

// Clamps to [0,1], quantizes round-half-up to round(v*255). Requires 3 channels.
void save_ppm(const Image& img, const std::string& path);

// Masks persist as one PPM per class with 0/255 gray values.
void save_mask_ppm(const SegMask& mask, int cls, const std::string& path);
SegMask load_mask_ppm(const std::vector<std::string>& class_paths);

// Bilinear interpolation with edge clamping. Output stays within the input's
// value range; identical dimensions reproduce the input bitwise.
Image resize_bilinear(const Image& img, int new_h, int new_w);

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Round-half-up quantization used at every image file boundary.
std::uint8_t quantize_byte(double v);

} // namespace bevdg
