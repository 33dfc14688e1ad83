// SPDX-License-Identifier: Apache-2.0
#include "hairkit/image.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hairkit {

namespace {

static_assert(std::endian::native == std::endian::little,
              "file I/O assumes a little-endian host");

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

void write_pfm(const std::string& path, const PlanarImage& img) {
    if (img.channels != 1 && img.channels != 2 && img.channels != 3)
        throw std::invalid_argument("write_pfm: channel count must be 1, 2 or 3");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pfm: cannot open " + path);
    const char* magic = img.channels == 1 ? "Pf" : (img.channels == 2 ? "PF2" : "PF");
    out << magic << "\n" << img.width << " " << img.height << "\n-1.0\n";
    // PFM stores rows bottom-up.
    std::vector<float> row(static_cast<std::size_t>(img.width) * img.channels);
    for (int y = img.height - 1; y >= 0; --y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                row[static_cast<std::size_t>(x) * img.channels + c] =
                    static_cast<float>(img.at(x, y, c));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("write_pfm: write failed for " + path);
}

PlanarImage read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pfm: cannot open " + path);
    std::string magic;
    in >> magic;
    int channels = 0;
    if (magic == "Pf") channels = 1;
    else if (magic == "PF2") channels = 2;
    else if (magic == "PF") channels = 3;
    else throw std::runtime_error("read_pfm: bad magic in " + path);
    int w = 0, h = 0;
    double scale = 0.0;
    in >> w >> h >> scale;
    if (w <= 0 || h <= 0) throw std::runtime_error("read_pfm: bad dimensions in " + path);
    in.get();  // single whitespace after the scale line
    if (scale >= 0) throw std::runtime_error("read_pfm: big-endian PFM unsupported");
    PlanarImage img(w, h, channels);
    std::vector<float> row(static_cast<std::size_t>(w) * channels);
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw std::runtime_error("read_pfm: truncated file " + path);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(x, y, c) = row[static_cast<std::size_t>(x) * channels + c];
    }
    return img;
}

ImageF pfm_to_gray(const PlanarImage& img) {
    if (img.channels != 1)
        throw std::invalid_argument("pfm_to_gray: expected a single-channel map");
    ImageF out(img.width, img.height);
    out.data.assign(img.data.begin(), img.data.end());
    return out;
}

PlanarImage gray_to_pfm(const ImageF& img) {
    PlanarImage out(img.width, img.height, 1);
    out.data.assign(img.data.begin(), img.data.end());
    return out;
}

void write_pgm(const std::string& path, const ImageU8& mask) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(mask.data.data()),
              static_cast<std::streamsize>(mask.data.size()));
    if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

ImageU8 read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error("read_pgm: bad magic in " + path);
    int w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    if (w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("read_pgm: unsupported header in " + path);
    in.get();
    ImageU8 mask(w, h);
    in.read(reinterpret_cast<char*>(mask.data.data()),
            static_cast<std::streamsize>(mask.data.size()));
    if (!in) throw std::runtime_error("read_pgm: truncated file " + path);
    return mask;
}

void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
        throw std::invalid_argument("write_png_rgb: buffer size mismatch");

    // Raw scanlines with filter byte 0.
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(height) * (1 + static_cast<std::size_t>(width) * 3));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        const std::uint8_t* row = rgb.data() + static_cast<std::size_t>(y) * width * 3;
        raw.insert(raw.end(), row, row + static_cast<std::size_t>(width) * 3);
    }
    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> zdata(zlen);
    if (compress2(zdata.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("write_png_rgb: deflate failed");
    zdata.resize(zlen);

    std::vector<std::uint8_t> out;
    const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    out.insert(out.end(), sig, sig + 8);

    auto chunk = [&out](const char tag[4], const std::vector<std::uint8_t>& payload) {
        put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
        const std::size_t crc_start = out.size();
        out.insert(out.end(), tag, tag + 4);
        out.insert(out.end(), payload.begin(), payload.end());
        const uLong crc = crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
        put_u32_be(out, static_cast<std::uint32_t>(crc));
    };

    std::vector<std::uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(width));
    put_u32_be(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type: truecolor
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter
    ihdr.push_back(0);   // interlace
    chunk("IHDR", ihdr);
    chunk("IDAT", zdata);
    chunk("IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_png_rgb: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write_png_rgb: write failed for " + path);
}

}  // namespace hairkit
