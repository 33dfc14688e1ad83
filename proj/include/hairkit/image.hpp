// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hairkit {

/// Dense row-major scalar image. Row 0 is the top of the image.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, T fill = T{})
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& other) const {
        return width == other.width && height == other.height;
    }
};

using ImageF = Image<double>;
using ImageU8 = Image<std::uint8_t>;

/// Multi-channel float image stored interleaved (used for direction maps).
struct PlanarImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;  // interleaved, row-major

    PlanarImage() = default;
    PlanarImage(int w, int h, int c)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, 0.0) {}

    double& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

// PFM float maps. "Pf" is single channel, "PF" is three channels; the
// two-channel direction buffers use the "PF2" magic. Scale line carries
// byte order, negative = little endian, per the usual convention.
void write_pfm(const std::string& path, const PlanarImage& img);
PlanarImage read_pfm(const std::string& path);

ImageF pfm_to_gray(const PlanarImage& img);
PlanarImage gray_to_pfm(const ImageF& img);

// Binary 8-bit PGM (P5), used for masks. Nonzero = set.
void write_pgm(const std::string& path, const ImageU8& mask);
ImageU8 read_pgm(const std::string& path);

// Minimal RGB8 PNG writer (zlib-deflated, no interlacing); debug exports only.
void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb);

}  // namespace hairkit
