// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hairkit/hair_map.hpp"
#include "hairkit/scalp.hpp"

#include <vector>

namespace hairkit {

/// A 3D Gaussian constrained to a strand segment: mean at the segment
/// midpoint, covariance eps^2*I + (d^2-eps^2)*b*b^T with the major axis
/// along the unit tangent b and d = width_scale * segment_length. This is
/// the (E D)(E D)^T construction for any orthonormal completion of b.
struct StrandSplat {
    Eigen::Vector3d mean;
    Eigen::Matrix3d covariance;
    Eigen::Vector3d direction;  // unit tangent, root to tip
    double major_sigma = 0.0;   // d
    double seg_length = 0.0;
    int texel = -1;
    int segment = -1;
};

struct RenderConfig {
    double width_scale = 0.5;  // d = width_scale * |v|
    double epsilon = 0.005;    // minor-axis stddev, scene units
    double opacity = 0.95;     // per-splat base opacity
    double cutoff = 3.0;       // Mahalanobis footprint truncation
    int threads = 1;           // 0 = hardware default

    /// Gaussian width used while training the hybrid prior.
    static RenderConfig hybrid_stage() {
        RenderConfig c;
        c.epsilon = 0.005;
        return c;
    }
    /// Gaussian width used during inversion.
    static RenderConfig inversion_stage() {
        RenderConfig c;
        c.epsilon = 0.00035;
        return c;
    }
};

/// Rendered supervision channels plus the per-pixel contributor lists the
/// backward pass replays. Pixels with zero silhouette have zero direction
/// and their depth is undefined (coverage flag 0).
struct RenderBuffers {
    int width = 0;
    int height = 0;
    std::vector<double> silhouette;         // H*W, in [0, 1]
    std::vector<Eigen::Vector2d> direction; // H*W, norm <= silhouette
    std::vector<double> depth;              // H*W, alpha-composited camera depth
    std::vector<std::uint8_t> coverage;     // H*W, silhouette > 0
    // CSR contributor lists in composite order (splat indices).
    std::vector<int> contrib_offsets;  // H*W + 1
    std::vector<int> contrib_splats;
    bool has_contributors = false;

    int pixel(int x, int y) const { return y * width + x; }
};

/// Per-pixel upstream gradients for the backward pass. Empty vectors are
/// treated as zero.
struct RenderGradients {
    std::vector<double> silhouette;
    std::vector<Eigen::Vector2d> direction;
    std::vector<double> depth;
};

/// Per-texel, per-point world-space gradients (empty for untouched texels).
using PointGradients = std::vector<std::vector<Eigen::Vector3d>>;

/// One splat per non-degenerate segment of every active strand.
/// `skipped_degenerate` counts dropped zero-length segments.
std::vector<StrandSplat> build_splats(const HairMap& hair, const RenderConfig& config,
                                      int* skipped_degenerate = nullptr);

/// Tile-free scanline rasterizer: perspective EWA projection of each splat,
/// front-to-back alpha compositing in global (depth, splat index) order.
RenderBuffers rasterize(const std::vector<StrandSplat>& splats, const CameraModel& cam,
                        const RenderConfig& config);

/// Brute-force oracle with the same mathematical contract: every pixel
/// tests every splat, full per-pixel ordering, no footprint binning.
RenderBuffers reference_rasterize(const std::vector<StrandSplat>& splats,
                                  const CameraModel& cam, const RenderConfig& config);

/// Analytic chain rule from pixel-space gradients back to strand points:
/// through compositing, the 2D Gaussian, the EWA projection, the covariance
/// construction and the midpoint/tangent maps. The depth ordering is
/// treated as fixed. Requires buffers produced by rasterize (contributor
/// lists retained); `hair` must be the map the splats were built from.
PointGradients rasterize_backward(const RenderBuffers& buffers,
                                  const RenderGradients& upstream,
                                  const std::vector<StrandSplat>& splats,
                                  const HairMap& hair, const CameraModel& cam,
                                  const RenderConfig& config);

/// Per-point visibility weights: 3 when the point projects inside the image
/// and its segment's splat is a front-most contributor (transmittance ahead
/// of it at its pixel >= 0.5), 1 otherwise. Aligned with hair.strands.
std::vector<std::vector<double>> visibility_weights(const HairMap& hair,
                                                    const CameraModel& cam,
                                                    const RenderConfig& config);

// PFM serialization of the three channels plus a hue-coded debug PNG for
// the direction buffer.
void save_buffers(const std::string& dir_path, const RenderBuffers& buffers);
void save_direction_debug_png(const std::string& path, const RenderBuffers& buffers);

}  // namespace hairkit
