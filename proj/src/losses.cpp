// SPDX-License-Identifier: Apache-2.0
#include "hairkit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hairkit {

namespace {

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void validate_targets(const TargetMaps& targets) {
    const std::size_t n = static_cast<std::size_t>(targets.width) * targets.height;
    if (targets.silhouette.size() != n || targets.direction.size() != n ||
        targets.depth.size() != n || targets.depth_valid.size() != n)
        throw std::invalid_argument("target maps have inconsistent sizes");
    for (std::size_t p = 0; p < n; ++p)
        if (targets.silhouette[p] == 0.0 && !targets.direction[p].isZero())
            throw std::invalid_argument("target direction must be zero off-hair");
}

PointLossResult point_loss(const Strand& pred, const Strand& gt, const LossWeights& weights) {
    if (pred.size() != gt.size())
        throw std::invalid_argument("point_loss: strand lengths differ");
    const int length = pred.size();
    PointLossResult out;
    out.gradients.assign(length, Eigen::Vector3d::Zero());

    // Position term: |p - p_hat|_2 per point.
    for (int j = 0; j < length; ++j) {
        const Eigen::Vector3d d = pred.points[j] - gt.points[j];
        const double n = d.norm();
        out.value += n;
        if (n > 0.0) out.gradients[j] += d / n;
    }

    // Direction term: lambda_dir * |v - v_hat|_1 per segment.
    if (weights.lambda_dir != 0.0) {
        for (int j = 0; j + 1 < length; ++j) {
            const Eigen::Vector3d dv = (pred.points[j + 1] - pred.points[j]) -
                                       (gt.points[j + 1] - gt.points[j]);
            out.value += weights.lambda_dir * dv.cwiseAbs().sum();
            const Eigen::Vector3d s(sign_of(dv.x()), sign_of(dv.y()), sign_of(dv.z()));
            out.gradients[j + 1] += weights.lambda_dir * s;
            out.gradients[j] -= weights.lambda_dir * s;
        }
    }

    // Curvature term: lambda_curv * |g - g_hat| per interior point.
    if (weights.lambda_curv != 0.0 && length >= 3) {
        const SegmentDirections ps = segment_directions(pred);
        const SegmentDirections gs = segment_directions(gt);
        for (int j = 0; j + 2 < length; ++j) {
            const Eigen::Vector3d cross = ps.directions[j].cross(ps.directions[j + 1]);
            const double g_pred = cross.norm();
            const double g_gt = gs.directions[j].cross(gs.directions[j + 1]).norm();
            out.value += weights.lambda_curv * std::abs(g_pred - g_gt);
            const double outer = weights.lambda_curv * sign_of(g_pred - g_gt);
            if (outer == 0.0 || g_pred <= 0.0) continue;
            const Eigen::Vector3d g_cross = cross / g_pred;
            // g = |b_j x b_{j+1}|
            const Eigen::Vector3d g_b0 = ps.directions[j + 1].cross(g_cross);
            const Eigen::Vector3d g_b1 = -ps.directions[j].cross(g_cross);
            // b = v / |v| with degenerate segments held constant.
            auto scatter = [&](int seg, const Eigen::Vector3d& g_b) {
                if (ps.lengths[seg] < kDegenerateSegmentLength) return;
                const Eigen::Vector3d& b = ps.directions[seg];
                const Eigen::Vector3d g_v =
                    (g_b - b * b.dot(g_b)) / ps.lengths[seg];
                out.gradients[seg + 1] += outer * g_v;
                out.gradients[seg] -= outer * g_v;
            };
            scatter(j, g_b0);
            scatter(j + 1, g_b1);
        }
    }
    return out;
}

double mae_loss(const HairMap& pred, const HairMap& gt, const LossWeights& weights) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw std::invalid_argument("mae_loss: map dimensions differ");
    int length = 0;
    double total = 0.0;
    for (int t = 0; t < pred.texels(); ++t) {
        if (!pred.active[t] || !gt.active[t]) continue;
        if (length == 0) length = pred.strands[t].size();
        total += point_loss(pred.strands[t], gt.strands[t], weights).value;
    }
    if (length == 0) return 0.0;
    return total / (static_cast<double>(pred.texels()) * length);
}

double weighted_mae_loss(const HairMap& pred, const HairMap& gt,
                         const std::vector<std::vector<double>>& vis_weights,
                         const LossWeights& weights) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw std::invalid_argument("weighted_mae_loss: map dimensions differ");
    if (static_cast<int>(vis_weights.size()) != pred.texels())
        throw std::invalid_argument("weighted_mae_loss: weight grid size mismatch");
    double total = 0.0;
    double weight_sum = 0.0;
    for (int t = 0; t < pred.texels(); ++t) {
        if (!pred.active[t] || !gt.active[t] || vis_weights[t].empty()) continue;
        const Strand& ps = pred.strands[t];
        if (static_cast<int>(vis_weights[t].size()) != ps.size())
            throw std::invalid_argument("weighted_mae_loss: per-point weight count mismatch");
        // Per-point terms of point_loss, re-derived so each can be weighted.
        const Strand& gs = gt.strands[t];
        const CurvatureResult pc = ps.size() >= 3 ? curvature(ps) : CurvatureResult{};
        const CurvatureResult gc = gs.size() >= 3 ? curvature(gs) : CurvatureResult{};
        for (int j = 0; j < ps.size(); ++j) {
            const double w = vis_weights[t][j];
            if (w <= 0.0)
                throw std::invalid_argument("weighted_mae_loss: weights must be positive");
            double term = (ps.points[j] - gs.points[j]).norm();
            if (j + 1 < ps.size())
                term += weights.lambda_dir *
                        ((ps.points[j + 1] - ps.points[j]) - (gs.points[j + 1] - gs.points[j]))
                            .cwiseAbs()
                            .sum();
            if (j + 2 < ps.size())
                term += weights.lambda_curv * std::abs(pc.values[j] - gc.values[j]);
            total += w * term;
            weight_sum += w;
        }
    }
    if (weight_sum == 0.0)
        throw std::invalid_argument("weighted_mae_loss: zero total weight");
    return total / weight_sum;
}

double pca_loss(const PcaHairMap& pred, const PcaHairMap& gt) {
    if (pred.width != gt.width || pred.height != gt.height ||
        pred.num_components() != gt.num_components())
        throw std::invalid_argument("pca_loss: map shapes differ");
    double total = 0.0;
    for (int t = 0; t < pred.texels(); ++t)
        total += (pred.coeffs.row(t) - gt.coeffs.row(t)).norm();
    return total / pred.texels();
}

double mask_loss(const PcaHairMap& pred, const PcaHairMap& gt) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw std::invalid_argument("mask_loss: map shapes differ");
    double total = 0.0;
    for (int t = 0; t < pred.texels(); ++t)
        total += std::abs(pred.baldness[t] - gt.baldness[t]);
    return total / pred.texels();
}

PixelLossResult seg_loss(const RenderBuffers& render, const TargetMaps& target) {
    if (render.width != target.width || render.height != target.height)
        throw std::invalid_argument("seg_loss: dimensions differ");
    const std::size_t n = render.silhouette.size();
    PixelLossResult out;
    out.gradients.silhouette.assign(n, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        const double d = render.silhouette[p] - target.silhouette[p];
        out.value += std::abs(d);
        out.gradients.silhouette[p] = sign_of(d) / static_cast<double>(n);
    }
    out.value /= static_cast<double>(n);
    return out;
}

PixelLossResult dirmap_loss(const RenderBuffers& render, const TargetMaps& target) {
    if (render.width != target.width || render.height != target.height)
        throw std::invalid_argument("dirmap_loss: dimensions differ");
    const std::size_t n = render.direction.size();
    PixelLossResult out;
    out.gradients.direction.assign(n, Eigen::Vector2d::Zero());
    std::size_t count = 0;
    for (std::size_t p = 0; p < n; ++p)
        if (target.silhouette[p] > 0.0) ++count;
    if (count == 0) return out;
    for (std::size_t p = 0; p < n; ++p) {
        if (target.silhouette[p] <= 0.0) continue;
        const Eigen::Vector2d d = render.direction[p] - target.direction[p];
        out.value += d.cwiseAbs().sum();
        out.gradients.direction[p] =
            Eigen::Vector2d(sign_of(d.x()), sign_of(d.y())) / static_cast<double>(count);
    }
    out.value /= static_cast<double>(count);
    return out;
}

PixelLossResult depth_loss(const RenderBuffers& render, const TargetMaps& target) {
    if (render.width != target.width || render.height != target.height)
        throw std::invalid_argument("depth_loss: dimensions differ");
    const std::size_t n = render.depth.size();
    PixelLossResult out;
    out.gradients.depth.assign(n, 0.0);
    std::size_t count = 0;
    for (std::size_t p = 0; p < n; ++p)
        if (render.silhouette[p] > 0.5 && target.silhouette[p] > 0.5 && target.depth_valid[p])
            ++count;
    if (count == 0) return out;
    for (std::size_t p = 0; p < n; ++p) {
        if (!(render.silhouette[p] > 0.5 && target.silhouette[p] > 0.5 && target.depth_valid[p]))
            continue;
        const double d = render.depth[p] - target.depth[p];
        out.value += std::abs(d);
        out.gradients.depth[p] = sign_of(d) / static_cast<double>(count);
    }
    out.value /= static_cast<double>(count);
    return out;
}

PenLossResult pen_loss(const HairMap& hair, const HeadModel& head) {
    PenLossResult out;
    out.gradients.resize(hair.texels());
    int length = 0;
    for (int t = 0; t < hair.texels(); ++t)
        if (hair.active[t]) {
            length = hair.strands[t].size();
            break;
        }
    if (length == 0) return out;
    const double norm = 1.0 / (static_cast<double>(hair.texels()) * length);
    for (int t = 0; t < hair.texels(); ++t) {
        if (!hair.active[t]) continue;
        const Strand& s = hair.strands[t];
        for (int j = 0; j < s.size(); ++j) {
            const double sdf = head_sdf(head, s.points[j]);
            if (sdf >= 0.0) continue;  // ReLU subgradient at 0 taken as 0
            out.value += -sdf * norm;
            if (out.gradients[t].empty())
                out.gradients[t].assign(s.size(), Eigen::Vector3d::Zero());
            out.gradients[t][j] = -head_sdf_gradient(head, s.points[j]) * norm;
        }
    }
    return out;
}

double real_loss(const RenderBuffers& render, const HairMap& hair, const TargetMaps& target,
                 const HeadModel& head, const LossWeights& weights) {
    double total = 0.0;
    if (weights.lambda_seg != 0.0) total += weights.lambda_seg * seg_loss(render, target).value;
    if (weights.lambda_dirmap != 0.0)
        total += weights.lambda_dirmap * dirmap_loss(render, target).value;
    if (weights.lambda_pen != 0.0) total += weights.lambda_pen * pen_loss(hair, head).value;
    if (weights.lambda_depth != 0.0)
        total += weights.lambda_depth * depth_loss(render, target).value;
    return total;
}

double hybrid_loss(double synth_term, double real_term, double mixing_rate_r) {
    return synth_term + mixing_rate_r * real_term;
}

std::optional<double> undir_metric(const std::vector<Eigen::Vector2d>& render_dirs,
                                   const std::vector<Eigen::Vector2d>& gabor_dirs,
                                   const std::vector<std::uint8_t>& mask) {
    if (render_dirs.size() != gabor_dirs.size() || render_dirs.size() != mask.size())
        throw std::invalid_argument("undir_metric: buffer sizes differ");
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < mask.size(); ++p) {
        if (!mask[p]) continue;
        const Eigen::Vector2d& a = render_dirs[p];
        const Eigen::Vector2d& b = gabor_dirs[p];
        if (a.norm() < 1e-12 || b.norm() < 1e-12) continue;
        double d = std::abs(std::atan2(a.y(), a.x()) - std::atan2(b.y(), b.x()));
        // Fold to [0, pi], then mod-pi to [0, pi/2].
        if (d > std::numbers::pi) d = 2.0 * std::numbers::pi - d;
        if (d > 0.5 * std::numbers::pi) d = std::numbers::pi - d;
        total += d;
        ++count;
    }
    if (count == 0) return std::nullopt;
    return total / static_cast<double>(count);
}

}  // namespace hairkit
