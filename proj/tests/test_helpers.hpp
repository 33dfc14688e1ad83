// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hairkit/strand_codec.hpp"

#include <complex>
#include <random>
#include <vector>

namespace hairkit::testing {

inline Strand random_strand(std::mt19937& rng, int length, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    Strand s;
    s.points.resize(length);
    for (auto& p : s.points) p = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    return s;
}

/// Independent O(L^2) unitary DFT: per-band complex summation with on-the-fly
/// trig, kept deliberately separate from the production transform tables.
inline std::vector<std::array<std::complex<double>, 3>> naive_dft(const Strand& strand) {
    const int length = strand.size();
    const int bands = length / 2 + 1;
    std::vector<std::array<std::complex<double>, 3>> out(bands);
    for (int m = 0; m < bands; ++m)
        for (int c = 0; c < 3; ++c) {
            std::complex<double> acc(0.0, 0.0);
            for (int j = 0; j < length; ++j) {
                const double angle = -2.0 * M_PI * j * m / length;
                acc += strand.points[j][c] * std::polar(1.0, angle);
            }
            out[m][c] = acc / std::sqrt(static_cast<double>(length));
        }
    return out;
}

/// Independent inverse: reconstruct via the full two-sided spectrum using
/// conjugate symmetry, then take real parts.
inline Strand naive_idft(const std::vector<std::array<std::complex<double>, 3>>& bands,
                         int length) {
    Strand s;
    s.points.assign(length, Eigen::Vector3d::Zero());
    for (int j = 0; j < length; ++j)
        for (int c = 0; c < 3; ++c) {
            std::complex<double> acc(0.0, 0.0);
            for (int m = 0; m < length; ++m) {
                const int folded = m <= length / 2 ? m : length - m;
                std::complex<double> coeff = bands[folded][c];
                if (m > length / 2) coeff = std::conj(coeff);
                acc += coeff * std::polar(1.0, 2.0 * M_PI * j * m / length);
            }
            s.points[j][c] = acc.real() / std::sqrt(static_cast<double>(length));
        }
    return s;
}

/// Relative error with an absolute floor for near-zero references.
inline double rel_error(double got, double want, double floor = 1e-8) {
    return std::abs(got - want) / std::max(std::abs(want), floor);
}

}  // namespace hairkit::testing
