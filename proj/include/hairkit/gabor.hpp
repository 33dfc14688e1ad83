// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hairkit/image.hpp"

namespace hairkit {

/// Undirected orientation field: angles in [0, pi), confidence >= 0 and a
/// validity mask (zero near borders where the kernels do not fit).
struct OrientationMap {
    int width = 0;
    int height = 0;
    ImageF angle;
    ImageF confidence;
    ImageU8 mask;
};

struct GaborParams {
    int n_orientations = 32;
    double wavelength = 4.0;  // pixels
    double sigma = 2.0;       // pixels
    double aspect = 0.5;      // envelope elongation along the stripe
    int threads = 1;
};

/// Oriented quadrature Gabor filtering: per pixel the angle is the argmax
/// response orientation (with quadratic interpolation between neighbors),
/// confidence the normalized peak prominence. Angles follow the stripe
/// (strand) direction. Zero-mean kernels make the output invariant to
/// affine brightness changes.
OrientationMap gabor_orientation(const ImageF& image, const GaborParams& params);

/// Depth normalization recipe: erode the mask, clip in-mask values to the
/// 2nd/98th quantiles, then min-max normalize to [0, 1]. A constant in-mask
/// depth (q98 == q02) maps to all zeros. Outside-mask pixels are invalid.
struct NormalizedDepth {
    ImageF depth;
    ImageU8 valid;
};
NormalizedDepth depth_normalize(const ImageF& depth, const ImageU8& hair_mask,
                                int erode_radius);

/// Disk erosion of a binary mask (radius in pixels; 0 returns the input).
ImageU8 erode_mask(const ImageU8& mask, int radius);

}  // namespace hairkit
