#include "bevdg/image.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace bevdg {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
    if (height < 1 || width < 1 || channels < 1)
        throw InvalidArgument("Image: dimensions must be >= 1");
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

SegMask::SegMask(int height, int width) : height_(height), width_(width) {
    if (height < 1 || width < 1)
        throw InvalidArgument("SegMask: dimensions must be >= 1");
    data_.assign(static_cast<std::size_t>(kNumClasses) * height * width, 0);
}

std::uint8_t quantize_byte(double v) {
    v = clamp01(v);
    double q = std::floor(v * 255.0 + 0.5); // round-half-up
    if (q < 0.0) q = 0.0;
    if (q > 255.0) q = 255.0;
    return static_cast<std::uint8_t>(q);
}

namespace {

// Reads one whitespace-delimited PPM header token, skipping '#' comments.
std::string next_header_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

int parse_header_int(std::istream& in, const std::string& what, const std::string& path) {
    std::string tok = next_header_token(in);
    if (tok.empty())
        throw FormatError("PPM header truncated (" + what + "): " + path);
    for (char c : tok)
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw FormatError("PPM header: bad " + what + " '" + tok + "': " + path);
    try {
        return std::stoi(tok);
    } catch (const std::exception&) {
        throw FormatError("PPM header: bad " + what + " '" + tok + "': " + path);
    }
}

} // namespace

Image load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open for reading: " + path);

    std::string magic = next_header_token(in);
    if (magic != "P6")
        throw FormatError("PPM header: expected magic P6, got '" + magic + "': " + path);
    int width = parse_header_int(in, "width", path);
    int height = parse_header_int(in, "height", path);
    int maxval = parse_header_int(in, "maxval", path);
    if (width < 1 || height < 1)
        throw FormatError("PPM header: bad dimensions: " + path);
    if (maxval != 255)
        throw FormatError("PPM: unsupported maxval " + std::to_string(maxval) +
                          " (only 255): " + path);
    // Exactly one whitespace byte separates the header from the payload; the
    // token reader above already consumed it.

    std::size_t npix = static_cast<std::size_t>(width) * height;
    std::vector<std::uint8_t> raw(npix * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw FormatError("PPM payload truncated: " + path);

    Image img(height, width, 3);
    for (int h = 0; h < height; ++h)
        for (int w = 0; w < width; ++w)
            for (int c = 0; c < 3; ++c)
                img.at(h, w, c) =
                    raw[(static_cast<std::size_t>(h) * width + w) * 3 + c] / 255.0;
    return img;
}

void save_ppm(const Image& img, const std::string& path) {
    if (img.channels() != 3)
        throw InvalidArgument("save_ppm: image must have 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open for writing: " + path);

    out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(img.width()) * img.height() * 3);
    for (int h = 0; h < img.height(); ++h)
        for (int w = 0; w < img.width(); ++w)
            for (int c = 0; c < 3; ++c)
                raw[(static_cast<std::size_t>(h) * img.width() + w) * 3 + c] =
                    quantize_byte(img.at(h, w, c));
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out)
        throw IoError("short write: " + path);
}

void save_mask_ppm(const SegMask& mask, int cls, const std::string& path) {
    if (cls < 0 || cls >= SegMask::kNumClasses)
        throw InvalidArgument("save_mask_ppm: class index out of range");
    Image img(mask.height(), mask.width(), 3);
    for (int h = 0; h < mask.height(); ++h)
        for (int w = 0; w < mask.width(); ++w) {
            double v = mask.at(h, w, cls) ? 1.0 : 0.0;
            for (int c = 0; c < 3; ++c) img.at(h, w, c) = v;
        }
    save_ppm(img, path);
}

SegMask load_mask_ppm(const std::vector<std::string>& class_paths) {
    if (class_paths.size() != SegMask::kNumClasses)
        throw InvalidArgument("load_mask_ppm: expected one path per class");
    SegMask mask;
    for (int cls = 0; cls < SegMask::kNumClasses; ++cls) {
        Image img = load_ppm(class_paths[cls]);
        if (cls == 0) {
            mask = SegMask(img.height(), img.width());
        } else if (img.height() != mask.height() || img.width() != mask.width()) {
            throw FormatError("load_mask_ppm: class planes disagree on dimensions");
        }
        for (int h = 0; h < img.height(); ++h)
            for (int w = 0; w < img.width(); ++w)
                mask.at(h, w, cls) = img.at(h, w, 0) >= 0.5 ? 1 : 0;
    }
    return mask;
}

Image resize_bilinear(const Image& img, int new_h, int new_w) {
    if (new_h < 1 || new_w < 1)
        throw InvalidArgument("resize_bilinear: target dimensions must be >= 1");
    if (new_h == img.height() && new_w == img.width())
        return img;

    Image out(new_h, new_w, img.channels());
    // Pixel-center mapping; source coordinates clamp at the edges.
    double sy = static_cast<double>(img.height()) / new_h;
    double sx = static_cast<double>(img.width()) / new_w;
    for (int h = 0; h < new_h; ++h) {
        double fy = (h + 0.5) * sy - 0.5;
        if (fy < 0.0) fy = 0.0;
        if (fy > img.height() - 1) fy = img.height() - 1;
        int y0 = static_cast<int>(std::floor(fy));
        int y1 = y0 + 1 < img.height() ? y0 + 1 : y0;
        double wy = fy - y0;
        for (int w = 0; w < new_w; ++w) {
            double fx = (w + 0.5) * sx - 0.5;
            if (fx < 0.0) fx = 0.0;
            if (fx > img.width() - 1) fx = img.width() - 1;
            int x0 = static_cast<int>(std::floor(fx));
            int x1 = x0 + 1 < img.width() ? x0 + 1 : x0;
            double wx = fx - x0;
            for (int c = 0; c < img.channels(); ++c) {
                // lerp form keeps constant inputs bitwise constant
                double top = img.at(y0, x0, c) + wx * (img.at(y0, x1, c) - img.at(y0, x0, c));
                double bot = img.at(y1, x0, c) + wx * (img.at(y1, x1, c) - img.at(y1, x0, c));
                out.at(h, w, c) = top + wy * (bot - top);
            }
        }
    }
    return out;
}

} // namespace bevdg
