// SPDX-License-Identifier: Apache-2.0
#include "hairkit/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <unordered_map>

namespace hairkit {

void adamw_step(AdamWState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                const std::vector<std::uint8_t>* mask) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size())
        throw std::invalid_argument("adamw_step: shape mismatch");
    if (mask && static_cast<Eigen::Index>(mask->size()) != params.size())
        throw std::invalid_argument("adamw_step: mask size mismatch");
    const AdamWConfig& c = state.config;
    ++state.step;
    const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        if (mask && !(*mask)[static_cast<std::size_t>(i)]) continue;
        const double g = grads(i);
        double& m = state.first_moment(i);
        double& v = state.second_moment(i);
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g * g;
        const double m_hat = m / bias1;
        const double v_hat = v / bias2;
        params(i) -= c.learning_rate * (m_hat / (std::sqrt(v_hat) + c.eps) +
                                        c.weight_decay * params(i));
    }
}

namespace {

/// Forward state of one fit step kept for the backward pass.
struct PipelineState {
    HairMap guides;
    HairMap dense;
    std::vector<StrandSplat> splats;
    RenderBuffers buffers;
};

void run_pipeline(const PcaHairMap& map, const StrandBasis& basis, const RootGrid& guide_roots,
                  const RootGrid& dense_roots, const CameraModel& cam,
                  const FitSchedule& schedule, PipelineState& out) {
    out.guides = decode_map(map, basis, guide_roots, schedule.bald_threshold);
    out.dense = upsample_guides(out.guides, guide_roots, dense_roots, schedule.nearest_weight);
    out.splats = build_splats(out.dense, schedule.render);
    out.buffers = rasterize(out.splats, cam, schedule.render);
}

}  // namespace

EvalMetrics eval_metrics(const RenderBuffers& render, const TargetMaps& target) {
    if (render.width != target.width || render.height != target.height)
        throw std::invalid_argument("eval_metrics: dimensions differ");
    EvalMetrics out;
    const std::size_t n = render.silhouette.size();
    std::size_t inter = 0, uni = 0;
    std::vector<std::uint8_t> both(n, 0);
    for (std::size_t p = 0; p < n; ++p) {
        const bool a = render.silhouette[p] > 0.5;
        const bool b = target.silhouette[p] > 0.5;
        if (a && b) {
            ++inter;
            both[p] = 1;
        }
        if (a || b) ++uni;
    }
    out.iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);

    const auto undir = undir_metric(render.direction, target.direction, both);
    out.undir = undir.value_or(0.5 * std::numbers::pi);

    std::vector<double> normalized;
    normalize_rendered_depth(render, normalized);
    double depth_sum = 0.0;
    std::size_t depth_n = 0;
    for (std::size_t p = 0; p < n; ++p) {
        if (!both[p] || !target.depth_valid[p]) continue;
        depth_sum += std::abs(normalized[p] - target.depth[p]);
        ++depth_n;
    }
    out.depth_l1 = depth_n > 0 ? depth_sum / static_cast<double>(depth_n) : 0.0;
    return out;
}

RenderBuffers render_map(const PcaHairMap& map, const StrandBasis& basis, const HeadModel& head,
                         const CameraModel& cam, const FitSchedule& schedule) {
    const RootGrid guide_roots = RootGrid::from_head(head, map.width, map.height);
    const RootGrid dense_roots =
        RootGrid::from_head(head, schedule.upsample_width, schedule.upsample_height);
    PipelineState state;
    run_pipeline(map, basis, guide_roots, dense_roots, cam, schedule, state);
    return state.buffers;
}

std::pair<PcaHairMap, FitReport> fit_hairmap(const PcaHairMap& init, const StrandBasis& basis,
                                             const RootGrid& roots, const HeadModel& head,
                                             const std::vector<FitView>& views,
                                             const FitSchedule& schedule) {
    if (views.empty()) throw std::invalid_argument("fit_hairmap: need at least one view");
    if (init.num_components() != basis.num_components())
        throw std::invalid_argument("fit_hairmap: init does not match basis");
    if (schedule.coarse_steps > schedule.total_steps)
        throw std::invalid_argument("fit_hairmap: coarse_steps exceeds total_steps");
    if (schedule.coarse_components > basis.num_components())
        throw std::invalid_argument("fit_hairmap: coarse_components exceeds basis size");
    for (const auto& view : views) validate_targets(view.targets);

    const auto t_start = std::chrono::steady_clock::now();
    PcaHairMap map = init;
    FitReport report;
    const RootGrid dense_roots =
        RootGrid::from_head(head, schedule.upsample_width, schedule.upsample_height);

    // Flat parameter vector view over the coefficient matrix (texel-major).
    const int n_tex = map.texels();
    const int n_comp = map.num_components();
    Eigen::VectorXd params(static_cast<Eigen::Index>(n_tex) * n_comp);
    for (int t = 0; t < n_tex; ++t)
        params.segment(static_cast<Eigen::Index>(t) * n_comp, n_comp) =
            map.coeffs.row(t).transpose();
    AdamWState adamw;
    adamw.config = schedule.adamw;
    adamw.init(params.size());

    std::vector<std::uint8_t> coarse_mask(static_cast<std::size_t>(params.size()), 0);
    for (int t = 0; t < n_tex; ++t)
        for (int c = 0; c < std::min(schedule.coarse_components, n_comp); ++c)
            coarse_mask[static_cast<std::size_t>(t) * n_comp + c] = 1;

    std::mt19937 view_rng(schedule.seed);
    PipelineState state;

    {
        run_pipeline(map, basis, roots, dense_roots, views.front().camera, schedule, state);
        report.initial = eval_metrics(state.buffers, views.front().targets);
    }

    for (int step = 0; step < schedule.total_steps; ++step) {
        int view_idx = 0;
        if (views.size() > 1) {
            if (schedule.sample_random_view) {
                std::uniform_int_distribution<int> pick(0, static_cast<int>(views.size()) - 1);
                view_idx = pick(view_rng);
            } else {
                view_idx = step % static_cast<int>(views.size());
            }
        }
        const FitView& view = views[static_cast<std::size_t>(view_idx)];

        run_pipeline(map, basis, roots, dense_roots, view.camera, schedule, state);

        // Loss terms and pixel-space gradients.
        const PixelLossResult seg = seg_loss(state.buffers, view.targets);
        const PixelLossResult dirm = dirmap_loss(state.buffers, view.targets);
        const PenLossResult pen = pen_loss(state.dense, head);

        // Depth term on the min-max normalized rendered depth (targets are
        // normalized the same way), made differentiable through the
        // normalization constants.
        std::vector<double> norm_depth;
        const DepthNormalization dn = normalize_rendered_depth(state.buffers, norm_depth);
        RenderBuffers norm_view = state.buffers;  // cheap copy of buffers; reuse masks
        norm_view.depth = norm_depth;
        const PixelLossResult dep = depth_loss(norm_view, view.targets);

        const double total = schedule.weights.lambda_seg * seg.value +
                             schedule.weights.lambda_dirmap * dirm.value +
                             schedule.weights.lambda_pen * pen.value +
                             schedule.weights.lambda_depth * dep.value;

        FitStepRow row;
        row.step = step;
        row.view = view_idx;
        row.seg = seg.value;
        row.dirmap = dirm.value;
        row.depth = dep.value;
        row.pen = pen.value;
        row.total = total;
        report.rows.push_back(row);

        if (!std::isfinite(total)) {
            report.aborted = true;
            report.abort_reason = "non-finite loss at step " + std::to_string(step);
            break;
        }

        // Assemble pixel gradients: d(total)/d(buffers).
        RenderGradients upstream;
        const std::size_t n_pix = state.buffers.silhouette.size();
        upstream.silhouette.assign(n_pix, 0.0);
        upstream.direction.assign(n_pix, Eigen::Vector2d::Zero());
        upstream.depth.assign(n_pix, 0.0);
        for (std::size_t p = 0; p < n_pix; ++p) {
            upstream.silhouette[p] = schedule.weights.lambda_seg * seg.gradients.silhouette[p];
            upstream.direction[p] = schedule.weights.lambda_dirmap * dirm.gradients.direction[p];
        }
        if (dn.valid && schedule.weights.lambda_depth != 0.0) {
            // Through n_p = (d_p - min) / (max - min); min/max live at
            // argmin/argmax pixels of the covered region.
            const double range = dn.max - dn.min;
            double g_sum = 0.0, g_dot = 0.0;
            for (std::size_t p = 0; p < n_pix; ++p) {
                const double g = schedule.weights.lambda_depth * dep.gradients.depth[p];
                if (g == 0.0) continue;
                upstream.depth[p] += g / range;
                g_sum += g;
                g_dot += g * norm_depth[p];
            }
            upstream.depth[static_cast<std::size_t>(dn.argmin)] += (g_dot - g_sum) / range;
            upstream.depth[static_cast<std::size_t>(dn.argmax)] += -g_dot / range;
        }

        PointGradients dense_grads = rasterize_backward(state.buffers, upstream, state.splats,
                                                        state.dense, view.camera,
                                                        schedule.render);
        // Penetration gradients act on the same dense map.
        for (int t = 0; t < state.dense.texels(); ++t) {
            if (pen.gradients[t].empty()) continue;
            auto& slot = dense_grads[t];
            if (slot.empty())
                slot.assign(pen.gradients[t].size(), Eigen::Vector3d::Zero());
            for (std::size_t j = 0; j < slot.size(); ++j)
                slot[j] += schedule.weights.lambda_pen * pen.gradients[t][j];
        }

        const PointGradients guide_grads = upsample_guides_vjp(
            dense_grads, state.guides, roots, dense_roots, schedule.nearest_weight);
        const Eigen::MatrixXd coeff_grads =
            decode_map_vjp(guide_grads, map, basis, roots, schedule.bald_threshold);

        Eigen::VectorXd grads(params.size());
        for (int t = 0; t < n_tex; ++t)
            grads.segment(static_cast<Eigen::Index>(t) * n_comp, n_comp) =
                coeff_grads.row(t).transpose();

        const bool coarse_phase = step < schedule.coarse_steps;
        adamw_step(adamw, params, grads, coarse_phase ? &coarse_mask : nullptr);
        for (int t = 0; t < n_tex; ++t)
            map.coeffs.row(t) =
                params.segment(static_cast<Eigen::Index>(t) * n_comp, n_comp).transpose();
    }

    {
        run_pipeline(map, basis, roots, dense_roots, views.front().camera, schedule, state);
        report.final = eval_metrics(state.buffers, views.front().targets);
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(map), std::move(report)};
}

namespace {

struct SamplePoint {
    Eigen::Vector3d position;
    Eigen::Vector3d tangent;
};

/// Every point of a strand set with its segment tangent.
std::vector<SamplePoint> all_points(const std::vector<Strand>& strands) {
    std::vector<SamplePoint> out;
    for (const auto& s : strands) {
        for (int j = 0; j < s.size(); ++j) {
            SamplePoint sp;
            sp.position = s.points[j];
            const int seg = std::min(j, s.size() - 2);
            const Eigen::Vector3d v = s.points[seg + 1] - s.points[seg];
            const double len = v.norm();
            sp.tangent = len > kDegenerateSegmentLength ? Eigen::Vector3d(v / len)
                                                        : Eigen::Vector3d(0, 0, 1);
            out.push_back(sp);
        }
    }
    if (out.empty()) throw std::invalid_argument("chamfer_eval: empty strand set");
    return out;
}

/// Uniform subsample (with replacement) of the query side; nearest-neighbor
/// queries always run against the full other set.
std::vector<SamplePoint> sample_points(const std::vector<SamplePoint>& points, int samples,
                                       std::mt19937& rng) {
    std::vector<SamplePoint> out;
    out.reserve(static_cast<std::size_t>(samples));
    std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
    for (int i = 0; i < samples; ++i) out.push_back(points[pick(rng)]);
    return out;
}

/// One chamfer direction: mean over a of min_b |a-b|^2 and the angle term
/// of the matched pair.
void chamfer_direction(const std::vector<SamplePoint>& from, const std::vector<SamplePoint>& to,
                       double& points_out, double& angle_out) {
    constexpr int kBruteForceLimit = 2048;
    double point_sum = 0.0, angle_sum = 0.0;
    if (static_cast<int>(to.size()) <= kBruteForceLimit) {
        for (const auto& a : from) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_i = 0;
            for (std::size_t i = 0; i < to.size(); ++i) {
                const double d = (a.position - to[i].position).squaredNorm();
                if (d < best) {
                    best = d;
                    best_i = i;
                }
            }
            point_sum += best;
            angle_sum += 1.0 - std::abs(a.tangent.dot(to[best_i].tangent));
        }
    } else {
        // Uniform hash grid sized to the target cloud.
        Eigen::Vector3d lo = to.front().position, hi = to.front().position;
        for (const auto& p : to) {
            lo = lo.cwiseMin(p.position);
            hi = hi.cwiseMax(p.position);
        }
        const double diag = (hi - lo).norm();
        const double cell = std::max(diag / 64.0, 1e-9);
        auto cell_of = [&](const Eigen::Vector3d& p) {
            return Eigen::Vector3i(static_cast<int>(std::floor((p.x() - lo.x()) / cell)),
                                   static_cast<int>(std::floor((p.y() - lo.y()) / cell)),
                                   static_cast<int>(std::floor((p.z() - lo.z()) / cell)));
        };
        auto key = [](const Eigen::Vector3i& c) {
            return (static_cast<std::int64_t>(c.x()) * 73856093) ^
                   (static_cast<std::int64_t>(c.y()) * 19349663) ^
                   (static_cast<std::int64_t>(c.z()) * 83492791);
        };
        std::unordered_map<std::int64_t, std::vector<std::size_t>> grid;
        for (std::size_t i = 0; i < to.size(); ++i)
            grid[key(cell_of(to[i].position))].push_back(i);
        for (const auto& a : from) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_i = 0;
            const Eigen::Vector3i c0 = cell_of(a.position);
            for (int ring = 0;; ++ring) {
                for (int dz = -ring; dz <= ring; ++dz)
                    for (int dy = -ring; dy <= ring; ++dy)
                        for (int dx = -ring; dx <= ring; ++dx) {
                            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring)
                                continue;
                            const auto it = grid.find(key(c0 + Eigen::Vector3i(dx, dy, dz)));
                            if (it == grid.end()) continue;
                            for (const std::size_t i : it->second) {
                                const double d = (a.position - to[i].position).squaredNorm();
                                if (d < best) {
                                    best = d;
                                    best_i = i;
                                }
                            }
                        }
                // A found neighbor can only be beaten inside ring+1.
                if (best < std::numeric_limits<double>::infinity() &&
                    std::sqrt(best) <= cell * (ring)) break;
                if (ring > 256) break;
            }
            point_sum += best;
            angle_sum += 1.0 - std::abs(a.tangent.dot(to[best_i].tangent));
        }
    }
    points_out = point_sum / static_cast<double>(from.size());
    angle_out = angle_sum / static_cast<double>(from.size());
}

}  // namespace

ChamferResult chamfer_eval(const std::vector<Strand>& pred, const std::vector<Strand>& gt,
                           int samples, unsigned seed) {
    if (pred.empty() || gt.empty())
        throw std::invalid_argument("chamfer_eval: both strand sets must be non-empty");
    if (samples < 1) throw std::invalid_argument("chamfer_eval: samples must be >= 1");
    std::mt19937 rng(seed);
    const auto pred_all = all_points(pred);
    const auto gt_all = all_points(gt);
    const auto a = static_cast<int>(pred_all.size()) <= samples
                       ? pred_all
                       : sample_points(pred_all, samples, rng);
    const auto b = static_cast<int>(gt_all.size()) <= samples
                       ? gt_all
                       : sample_points(gt_all, samples, rng);
    double pa = 0, aa = 0, pb = 0, ab = 0;
    chamfer_direction(a, gt_all, pa, aa);
    chamfer_direction(b, pred_all, pb, ab);
    return ChamferResult{0.5 * (pa + pb), 0.5 * (aa + ab)};
}

void save_report_csv(const std::string& path, const FitReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_report_csv: cannot open " + path);
    out.precision(17);
    out << "step,view,seg,dirmap,depth,pen,total\n";
    for (const auto& r : report.rows)
        out << r.step << "," << r.view << "," << r.seg << "," << r.dirmap << "," << r.depth
            << "," << r.pen << "," << r.total << "\n";
    if (!out) throw std::runtime_error("save_report_csv: write failed for " + path);
}

}  // namespace hairkit
