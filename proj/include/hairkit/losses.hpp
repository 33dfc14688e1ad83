// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hairkit/hair_map.hpp"
#include "hairkit/splat_render.hpp"

#include <optional>

namespace hairkit {

/// Loss weights; per-stage defaults reproduce the published training and
/// inversion settings.
struct LossWeights {
    double lambda_pca = 0.0;
    double lambda_dir = 0.0;
    double lambda_curv = 0.0;
    double lambda_mask = 0.0;
    double lambda_seg = 0.0;
    double lambda_dirmap = 0.0;
    double lambda_pen = 0.0;
    double lambda_depth = 0.0;
    double mixing_rate_r = 0.0;

    static LossWeights coarse_stage() {
        LossWeights w;
        w.lambda_pca = 0.1;
        w.lambda_dir = 0.1;
        w.lambda_curv = 1.0;
        w.lambda_mask = 0.0001;
        return w;
    }
    static LossWeights fine_stage() {
        LossWeights w;
        w.lambda_pca = 10.0;
        w.lambda_dir = 0.1;
        w.lambda_curv = 0.1;
        w.lambda_mask = 0.0001;
        return w;
    }
    static LossWeights hybrid_stage() {
        LossWeights w;
        w.lambda_pca = 0.1;
        w.lambda_dir = 0.1;
        w.lambda_curv = 0.1;
        w.lambda_mask = 0.0001;
        w.lambda_seg = 10.0;
        w.lambda_dirmap = 5.0;
        w.lambda_pen = 0.1;
        w.lambda_depth = 0.01;
        w.mixing_rate_r = 0.5;
        return w;
    }
    static LossWeights inversion_stage() {
        LossWeights w;
        w.lambda_seg = 1.0;
        w.lambda_dirmap = 0.8;
        w.lambda_pen = 0.3;
        w.lambda_depth = 0.01;
        return w;
    }
};

/// Per-view supervision: silhouette, 2D growth direction (zero off-hair),
/// normalized depth with a validity mask.
struct TargetMaps {
    int width = 0;
    int height = 0;
    std::vector<double> silhouette;
    std::vector<Eigen::Vector2d> direction;
    std::vector<double> depth;
    std::vector<std::uint8_t> depth_valid;

    int pixel(int x, int y) const { return y * width + x; }
};

void validate_targets(const TargetMaps& targets);

struct PointLossResult {
    double value = 0.0;
    std::vector<Eigen::Vector3d> gradients;  // w.r.t. the predicted points
};

/// Per-strand reconstruction loss: sum over points of
/// |p - p_hat| + lambda_dir * |v - v_hat|_1 + lambda_curv * |g - g_hat|.
PointLossResult point_loss(const Strand& pred, const Strand& gt, const LossWeights& weights);

/// Mean of point_loss terms over all texels and points (1/(HWL)); texels
/// inactive in either map contribute zero but stay in the normalizer.
double mae_loss(const HairMap& pred, const HairMap& gt, const LossWeights& weights);

/// Visibility-weighted variant: sum w_ij L_ij / sum w_ij.
double weighted_mae_loss(const HairMap& pred, const HairMap& gt,
                         const std::vector<std::vector<double>>& vis_weights,
                         const LossWeights& weights);

/// Mean per-texel L2 distance between coefficient maps.
double pca_loss(const PcaHairMap& pred, const PcaHairMap& gt);
/// Mean per-texel L1 distance between baldness maps.
double mask_loss(const PcaHairMap& pred, const PcaHairMap& gt);

struct PixelLossResult {
    double value = 0.0;
    RenderGradients gradients;
};

/// Mean absolute silhouette difference over all pixels.
PixelLossResult seg_loss(const RenderBuffers& render, const TargetMaps& target);

/// Mean L1 over direction 2-vectors, restricted to pixels with target
/// silhouette > 0 (the target direction is undefined off-hair).
PixelLossResult dirmap_loss(const RenderBuffers& render, const TargetMaps& target);

/// Masked mean L1 between rendered and target depth where both silhouettes
/// exceed 0.5 and the target depth is valid.
PixelLossResult depth_loss(const RenderBuffers& render, const TargetMaps& target);

struct PenLossResult {
    double value = 0.0;
    PointGradients gradients;
};

/// Head penetration: mean over all texels and points of ReLU(-sdf(p)).
PenLossResult pen_loss(const HairMap& hair, const HeadModel& head);

/// lambda_seg*L_seg + lambda_dirmap*L_dirmap + lambda_pen*L_pen
/// (+ lambda_depth*L_depth during inversion).
double real_loss(const RenderBuffers& render, const HairMap& hair, const TargetMaps& target,
                 const HeadModel& head, const LossWeights& weights);

/// synth + r * real.
double hybrid_loss(double synth_term, double real_term, double mixing_rate_r);

/// Mean angular distance between 2D orientation fields modulo pi, over the
/// given mask; range [0, pi/2]. Returns nullopt when the mask is empty.
/// Pixels where either field is (numerically) zero are skipped.
std::optional<double> undir_metric(const std::vector<Eigen::Vector2d>& render_dirs,
                                   const std::vector<Eigen::Vector2d>& gabor_dirs,
                                   const std::vector<std::uint8_t>& mask);

}  // namespace hairkit
