#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spoofbench/errors.hpp"

namespace spoofbench {

// Multiband raster with value semantics. Pixel values live in [0,1] when
// loaded from files; intermediate network representations may exceed that.
// Layout: row-major pixels, band-major within a pixel, i.e.
// data[(y * width + x) * bands + b].
struct MultibandImage {
    int width = 0;
    int height = 0;
    int bands = 0;
    std::vector<double> data;

    MultibandImage() = default;
    MultibandImage(int w, int h, int m, double fill = 0.0)
        : width(w), height(h), bands(m) {
        if (w < 1 || h < 1 || m < 1)
            throw std::invalid_argument("MultibandImage: dimensions must be >= 1");
        data.assign(static_cast<std::size_t>(w) * h * m, fill);
    }

    double& at(int x, int y, int b) {
        return data[(static_cast<std::size_t>(y) * width + x) * bands + b];
    }
    double at(int x, int y, int b) const {
        return data[(static_cast<std::size_t>(y) * width + x) * bands + b];
    }

    std::size_t size() const { return data.size(); }

    bool same_shape(const MultibandImage& o) const {
        return width == o.width && height == o.height && bands == o.bands;
    }
};

// Flattened deep representation. Ordering is the image layout itself:
// row-major pixels, band-major within each pixel.
struct FeatureVector {
    std::vector<double> values;

    std::size_t dimensionality() const { return values.size(); }
};

inline FeatureVector flatten(const MultibandImage& img) {
    return FeatureVector{img.data};
}

inline MultibandImage reshape(const FeatureVector& fv, int width, int height, int bands) {
    if (fv.values.size() != static_cast<std::size_t>(width) * height * bands)
        throw ShapeError("reshape: dimensionality does not match target shape");
    MultibandImage out(width, height, bands);
    out.data = fv.values;
    return out;
}

// Bilinear resize to an exact target size. Sample positions use the usual
// half-pixel convention, so equal source/target dimensions are an identity.
inline MultibandImage resize_exact(const MultibandImage& img, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1)
        throw std::invalid_argument("resize_exact: target dimensions must be >= 1");
    if (out_w == img.width && out_h == img.height) return img;

    MultibandImage out(out_w, out_h, img.bands);
    const double sx = static_cast<double>(img.width) / out_w;
    const double sy = static_cast<double>(img.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = fx - x0;
            for (int b = 0; b < img.bands; ++b) {
                const double top = img.at(x0, y0, b) * (1.0 - wx) + img.at(x1, y0, b) * wx;
                const double bot = img.at(x0, y1, b) * (1.0 - wx) + img.at(x1, y1, b) * wx;
                out.at(x, y, b) = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

// Resize so that the greatest axis equals target_max_axis, keeping aspect
// ratio. The minor axis is rounded half-up.
inline MultibandImage resize_keep_aspect(const MultibandImage& img, int target_max_axis) {
    if (target_max_axis < 8)
        throw std::invalid_argument("resize_keep_aspect: target must be >= 8");
    const int major = std::max(img.width, img.height);
    if (major == target_max_axis) return img;
    const int minor = std::min(img.width, img.height);
    const int new_minor = std::max(
        1, static_cast<int>(std::floor(static_cast<double>(minor) * target_max_axis / major + 0.5)));
    if (img.width >= img.height) return resize_exact(img, target_max_axis, new_minor);
    return resize_exact(img, new_minor, target_max_axis);
}

inline MultibandImage crop(const MultibandImage& img, int x0, int y0, int w, int h) {
    if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > img.width || y0 + h > img.height)
        throw ShapeError("crop: window outside image");
    MultibandImage out(w, h, img.bands);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int b = 0; b < img.bands; ++b) out.at(x, y, b) = img.at(x0 + x, y0 + y, b);
    return out;
}

// Central crop keeping floor(frac * dim) columns/rows; window centered with
// ties resolved toward the top-left.
inline MultibandImage crop_center_fraction(const MultibandImage& img, double frac_cols,
                                           double frac_rows) {
    if (frac_cols <= 0.0 || frac_cols > 1.0 || frac_rows <= 0.0 || frac_rows > 1.0)
        throw std::invalid_argument("crop_center_fraction: fractions must be in (0,1]");
    const int w = static_cast<int>(std::floor(frac_cols * img.width));
    const int h = static_cast<int>(std::floor(frac_rows * img.height));
    if (w < 1 || h < 1)
        throw std::invalid_argument("crop_center_fraction: resulting dimensions below 1x1");
    if (w == img.width && h == img.height) return img;
    return crop(img, (img.width - w) / 2, (img.height - h) / 2, w, h);
}

inline MultibandImage to_grayscale(const MultibandImage& img) {
    if (img.bands == 1) return img;
    if (img.bands != 3)
        throw UnsupportedFormatError("to_grayscale: only 1- or 3-band images supported");
    MultibandImage out(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out.at(x, y, 0) =
                0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
    return out;
}

inline MultibandImage mirror_horizontal(const MultibandImage& img) {
    MultibandImage out(img.width, img.height, img.bands);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int b = 0; b < img.bands; ++b)
                out.at(x, y, b) = img.at(img.width - 1 - x, y, b);
    return out;
}

// ---- PNM I/O: binary PGM (P5) for 1-band, binary PPM (P6) for 3-band ----

namespace detail {
inline int read_pnm_token(std::istream& in) {
    // Skips whitespace and '#' comments per the PNM grammar.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw ParseError("PNM: unexpected end of header");
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw ParseError("PNM: expected integer in header");
    return value;
}
}  // namespace detail

inline MultibandImage load_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image file: " + path);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    int bands = 0;
    if (magic[0] == 'P' && magic[1] == '5') bands = 1;
    else if (magic[0] == 'P' && magic[1] == '6') bands = 3;
    else throw UnsupportedFormatError("unsupported image format (want binary PGM/PPM): " + path);

    const int w = detail::read_pnm_token(in);
    const int h = detail::read_pnm_token(in);
    const int maxval = detail::read_pnm_token(in);
    if (maxval != 255)
        throw UnsupportedFormatError("PNM maxval must be 255 (8-bit): " + path);
    if (w < 1 || h < 1) throw ParseError("PNM: invalid dimensions in " + path);

    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * bands);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw ParseError("PNM: truncated pixel data in " + path);

    MultibandImage img(w, h, bands);
    for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
    return img;
}

inline void save_pnm(const MultibandImage& img, const std::string& path) {
    if (img.bands != 1 && img.bands != 3)
        throw UnsupportedFormatError("save_pnm: only 1- or 3-band images supported");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image file: " + path);
    out << (img.bands == 1 ? "P5" : "P6") << "\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> raw(img.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = std::clamp(img.data[i], 0.0, 1.0);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace spoofbench
