// SPDX-License-Identifier: Apache-2.0
#include "hairkit/gabor.hpp"

#include "hairkit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace hairkit {

namespace {

struct Kernel {
    int radius = 0;
    std::vector<double> even;  // zero-mean cosine phase
    std::vector<double> odd;   // sine phase

    double& e(int dx, int dy) {
        return even[static_cast<std::size_t>(dy + radius) * (2 * radius + 1) + (dx + radius)];
    }
    double& o(int dx, int dy) {
        return odd[static_cast<std::size_t>(dy + radius) * (2 * radius + 1) + (dx + radius)];
    }
};

/// Gabor pair whose carrier wave runs ACROSS stripes oriented at `angle`
/// (so the filter responds maximally to strands along `angle`).
Kernel make_kernel(double angle, const GaborParams& p) {
    Kernel k;
    k.radius = std::max(1, static_cast<int>(std::ceil(3.0 * p.sigma)));
    const int side = 2 * k.radius + 1;
    k.even.assign(static_cast<std::size_t>(side) * side, 0.0);
    k.odd.assign(static_cast<std::size_t>(side) * side, 0.0);
    // Carrier direction perpendicular to the stripe orientation.
    const double ca = std::cos(angle + 0.5 * std::numbers::pi);
    const double sa = std::sin(angle + 0.5 * std::numbers::pi);
    double even_sum = 0.0;
    for (int dy = -k.radius; dy <= k.radius; ++dy)
        for (int dx = -k.radius; dx <= k.radius; ++dx) {
            const double xr = dx * ca + dy * sa;        // across stripes
            const double yr = -dx * sa + dy * ca;       // along stripes
            const double envelope = std::exp(
                -(xr * xr + p.aspect * p.aspect * yr * yr) / (2.0 * p.sigma * p.sigma));
            const double phase = 2.0 * std::numbers::pi * xr / p.wavelength;
            k.e(dx, dy) = envelope * std::cos(phase);
            k.o(dx, dy) = envelope * std::sin(phase);
            even_sum += k.e(dx, dy);
        }
    // Remove the DC component of the even filter (the odd one is zero-mean
    // by antisymmetry up to rounding).
    const double mean = even_sum / (static_cast<double>(side) * side);
    for (auto& v : k.even) v -= mean;
    return k;
}

}  // namespace

OrientationMap gabor_orientation(const ImageF& image, const GaborParams& params) {
    if (params.n_orientations < 4)
        throw std::invalid_argument("gabor_orientation: need at least 4 orientations");
    if (params.wavelength <= 0 || params.sigma <= 0)
        throw std::invalid_argument("gabor_orientation: wavelength and sigma must be > 0");

    std::vector<Kernel> bank;
    bank.reserve(params.n_orientations);
    for (int i = 0; i < params.n_orientations; ++i)
        bank.push_back(make_kernel(std::numbers::pi * i / params.n_orientations, params));
    const int radius = bank.front().radius;
    if (image.width < 2 * radius + 1 || image.height < 2 * radius + 1)
        throw std::invalid_argument("gabor_orientation: image smaller than the kernel");

    OrientationMap out;
    out.width = image.width;
    out.height = image.height;
    out.angle = ImageF(image.width, image.height, 0.0);
    out.confidence = ImageF(image.width, image.height, 0.0);
    out.mask = ImageU8(image.width, image.height, 0);

    const int n = params.n_orientations;
    parallel_for_blocks(
        static_cast<std::int64_t>(image.height), params.threads,
        [&](std::int64_t y_lo, std::int64_t y_hi) {
            std::vector<double> energy(static_cast<std::size_t>(n));
            for (int y = static_cast<int>(y_lo); y < static_cast<int>(y_hi); ++y) {
                if (y < radius || y >= image.height - radius) continue;
                for (int x = radius; x < image.width - radius; ++x) {
                    double peak = 0.0;
                    int peak_i = 0;
                    double total = 0.0;
                    for (int i = 0; i < n; ++i) {
                        double re = 0.0, im = 0.0;
                        Kernel& k = bank[static_cast<std::size_t>(i)];
                        for (int dy = -radius; dy <= radius; ++dy)
                            for (int dx = -radius; dx <= radius; ++dx) {
                                const double v = image.at(x + dx, y + dy);
                                re += v * k.e(dx, dy);
                                im += v * k.o(dx, dy);
                            }
                        energy[static_cast<std::size_t>(i)] = re * re + im * im;
                        total += energy[static_cast<std::size_t>(i)];
                        if (energy[static_cast<std::size_t>(i)] > peak) {
                            peak = energy[static_cast<std::size_t>(i)];
                            peak_i = i;
                        }
                    }
                    out.mask.at(x, y) = 1;
                    if (peak <= 0.0) continue;  // flat patch: angle 0, confidence 0
                    // Quadratic interpolation over the circular neighborhood.
                    const double e0 = energy[static_cast<std::size_t>((peak_i + n - 1) % n)];
                    const double e1 = energy[static_cast<std::size_t>(peak_i)];
                    const double e2 = energy[static_cast<std::size_t>((peak_i + 1) % n)];
                    const double denom = e0 - 2.0 * e1 + e2;
                    const double shift =
                        std::abs(denom) > 1e-300 ? std::clamp(0.5 * (e0 - e2) / denom, -0.5, 0.5)
                                                 : 0.0;
                    double angle = std::numbers::pi * (peak_i + shift) / n;
                    angle = std::fmod(angle + std::numbers::pi, std::numbers::pi);
                    out.angle.at(x, y) = angle;
                    const double mean_e = total / n;
                    out.confidence.at(x, y) = (peak - mean_e) / peak;
                }
            }
        },
        /*block=*/8);
    return out;
}

ImageU8 erode_mask(const ImageU8& mask, int radius) {
    if (radius <= 0) return mask;
    ImageU8 out(mask.width, mask.height, 0);
    std::vector<std::pair<int, int>> disk;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dy * dy <= radius * radius) disk.emplace_back(dx, dy);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            bool keep = mask.at(x, y) != 0;
            for (std::size_t i = 0; keep && i < disk.size(); ++i) {
                const int nx = x + disk[i].first;
                const int ny = y + disk[i].second;
                if (nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height ||
                    mask.at(nx, ny) == 0)
                    keep = false;
            }
            out.at(x, y) = keep ? 1 : 0;
        }
    return out;
}

NormalizedDepth depth_normalize(const ImageF& depth, const ImageU8& hair_mask,
                                int erode_radius) {
    if (depth.width != hair_mask.width || depth.height != hair_mask.height)
        throw std::invalid_argument("depth_normalize: depth and mask shapes differ");
    const ImageU8 eroded = erode_mask(hair_mask, erode_radius);
    std::vector<double> values;
    values.reserve(eroded.size());
    for (std::size_t p = 0; p < eroded.size(); ++p)
        if (eroded.data[p]) values.push_back(depth.data[p]);
    if (values.empty())
        throw std::invalid_argument("depth_normalize: mask empty after erosion");

    // Nearest-rank quantiles on the sorted in-mask values.
    std::sort(values.begin(), values.end());
    auto quantile = [&values](double q) {
        const auto idx = static_cast<std::size_t>(
            std::llround(q * static_cast<double>(values.size() - 1)));
        return values[std::min(idx, values.size() - 1)];
    };
    const double lo = quantile(0.02);
    const double hi = quantile(0.98);

    NormalizedDepth out;
    out.depth = ImageF(depth.width, depth.height, 0.0);
    out.valid = eroded;
    const double range = hi - lo;
    for (std::size_t p = 0; p < eroded.size(); ++p) {
        if (!eroded.data[p]) continue;
        if (range <= 0.0) continue;  // constant depth maps to 0
        const double clipped = std::clamp(depth.data[p], lo, hi);
        out.depth.data[p] = (clipped - lo) / range;
    }
    return out;
}

}  // namespace hairkit
