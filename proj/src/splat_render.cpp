// SPDX-License-Identifier: Apache-2.0
#include "hairkit/splat_render.hpp"

#include "hairkit/image.hpp"
#include "hairkit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace hairkit {

namespace {

constexpr double kDirDegenerate = 1e-12;

/// Screen-space state of one splat, shared by forward and backward passes.
struct ProjectedSplat {
    bool valid = false;
    Eigen::Vector2d proj{0, 0};   // projected mean, pixel coords
    double depth = 0.0;           // camera-space z of the mean
    Eigen::Matrix2d cov2d;        // EWA-projected covariance
    Eigen::Matrix2d conic;        // inverse of cov2d
    Eigen::Vector2d dir2d{0, 0};  // normalized screen tangent (0 if degenerate)
    double dir_raw_norm = 0.0;
    double radius = 0.0;          // cutoff * sqrt(lambda_max)
    Eigen::Vector3d q{0, 0, 0};   // camera-space mean
};

std::vector<ProjectedSplat> project_splats(const std::vector<StrandSplat>& splats,
                                           const CameraModel& cam,
                                           const RenderConfig& config) {
    std::vector<ProjectedSplat> out(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) {
        const StrandSplat& sp = splats[i];
        ProjectedSplat& ps = out[i];
        const Eigen::Vector3d q = cam.rotation * sp.mean + cam.translation;
        if (q.z() <= kCameraNearPlane) continue;
        ps.q = q;
        ps.depth = q.z();
        ps.proj = {cam.fx * q.x() / q.z() + cam.cx, cam.fy * q.y() / q.z() + cam.cy};

        Eigen::Matrix<double, 2, 3> jac = Eigen::Matrix<double, 2, 3>::Zero();
        jac(0, 0) = cam.fx / q.z();
        jac(0, 2) = -cam.fx * q.x() / (q.z() * q.z());
        jac(1, 1) = cam.fy / q.z();
        jac(1, 2) = -cam.fy * q.y() / (q.z() * q.z());

        const Eigen::Matrix3d cam_cov =
            cam.rotation * sp.covariance * cam.rotation.transpose();
        ps.cov2d = jac * cam_cov * jac.transpose();
        const double det = ps.cov2d.determinant();
        if (!(det > 0.0) || !ps.cov2d.allFinite()) continue;
        ps.conic = ps.cov2d.inverse();

        const Eigen::Vector2d raw = jac * (cam.rotation * sp.direction);
        ps.dir_raw_norm = raw.norm();
        if (ps.dir_raw_norm >= kDirDegenerate) ps.dir2d = raw / ps.dir_raw_norm;

        const double half_trace = 0.5 * (ps.cov2d(0, 0) + ps.cov2d(1, 1));
        const double disc = std::sqrt(std::max(
            0.0, half_trace * half_trace - det));
        const double lambda_max = half_trace + disc;
        ps.radius = config.cutoff * std::sqrt(std::max(lambda_max, 0.0));
        ps.valid = true;
    }
    return out;
}

/// Splat indices sorted by (depth, index); invalid splats dropped.
std::vector<int> depth_order(const std::vector<ProjectedSplat>& projected) {
    std::vector<int> order;
    order.reserve(projected.size());
    for (std::size_t i = 0; i < projected.size(); ++i)
        if (projected[i].valid) order.push_back(static_cast<int>(i));
    std::sort(order.begin(), order.end(), [&projected](int a, int b) {
        if (projected[a].depth != projected[b].depth)
            return projected[a].depth < projected[b].depth;
        return a < b;
    });
    return order;
}

struct PixelSpan {
    int x0, x1, y0, y1;  // inclusive pixel ranges
    bool empty;
};

PixelSpan footprint(const ProjectedSplat& ps, int width, int height) {
    PixelSpan span{};
    // Pixel (i, j) samples at center (i + 0.5, j + 0.5).
    span.x0 = std::max(0, static_cast<int>(std::floor(ps.proj.x() - ps.radius - 0.5)));
    span.x1 = std::min(width - 1, static_cast<int>(std::ceil(ps.proj.x() + ps.radius - 0.5)));
    span.y0 = std::max(0, static_cast<int>(std::floor(ps.proj.y() - ps.radius - 0.5)));
    span.y1 = std::min(height - 1, static_cast<int>(std::ceil(ps.proj.y() + ps.radius - 0.5)));
    span.empty = span.x0 > span.x1 || span.y0 > span.y1;
    return span;
}

void init_buffers(RenderBuffers& buffers, const CameraModel& cam) {
    buffers.width = cam.width;
    buffers.height = cam.height;
    const std::size_t n = static_cast<std::size_t>(cam.width) * cam.height;
    buffers.silhouette.assign(n, 0.0);
    buffers.direction.assign(n, Eigen::Vector2d::Zero());
    buffers.depth.assign(n, 0.0);
    buffers.coverage.assign(n, 0);
}

/// Front-to-back compositing of one pixel given its contributor list.
void composite_pixel(const std::vector<ProjectedSplat>& projected, const int* begin,
                     const int* end, double px, double py, double opacity, double cutoff2,
                     double& sil, Eigen::Vector2d& dir, double& depth) {
    double transmittance = 1.0;
    sil = 0.0;
    dir.setZero();
    depth = 0.0;
    for (const int* it = begin; it != end; ++it) {
        const ProjectedSplat& ps = projected[*it];
        const Eigen::Vector2d delta(px - ps.proj.x(), py - ps.proj.y());
        const double m2 = delta.dot(ps.conic * delta);
        if (m2 > cutoff2) continue;
        const double alpha = opacity * std::exp(-0.5 * m2);
        const double w = transmittance * alpha;
        sil += w;
        dir += w * ps.dir2d;
        depth += w * ps.depth;
        transmittance *= 1.0 - alpha;
    }
}

}  // namespace

std::vector<StrandSplat> build_splats(const HairMap& hair, const RenderConfig& config,
                                      int* skipped_degenerate) {
    if (config.epsilon <= 0.0) throw std::invalid_argument("build_splats: epsilon must be > 0");
    if (config.opacity <= 0.0 || config.opacity > 1.0)
        throw std::invalid_argument("build_splats: opacity must lie in (0, 1]");
    if (hair.active_count() == 0)
        throw std::invalid_argument("build_splats: hair map has no active strands");

    std::vector<StrandSplat> splats;
    int skipped = 0;
    const double eps2 = config.epsilon * config.epsilon;
    for (int t = 0; t < hair.texels(); ++t) {
        if (!hair.active[t]) continue;
        const Strand& s = hair.strands[t];
        for (int j = 0; j + 1 < s.size(); ++j) {
            const Eigen::Vector3d v = s.points[j + 1] - s.points[j];
            const double len = v.norm();
            if (len < kDegenerateSegmentLength) {
                ++skipped;
                continue;
            }
            StrandSplat sp;
            sp.mean = 0.5 * (s.points[j] + s.points[j + 1]);
            sp.direction = v / len;
            sp.seg_length = len;
            sp.major_sigma = config.width_scale * len;
            const double d2 = sp.major_sigma * sp.major_sigma;
            sp.covariance = eps2 * Eigen::Matrix3d::Identity() +
                            (d2 - eps2) * sp.direction * sp.direction.transpose();
            sp.texel = t;
            sp.segment = j;
            splats.push_back(sp);
        }
    }
    if (skipped_degenerate) *skipped_degenerate = skipped;
    return splats;
}

RenderBuffers rasterize(const std::vector<StrandSplat>& splats, const CameraModel& cam,
                        const RenderConfig& config) {
    RenderBuffers buffers;
    init_buffers(buffers, cam);
    const std::vector<ProjectedSplat> projected = project_splats(splats, cam, config);
    const std::vector<int> order = depth_order(projected);

    // Counting scatter of footprints into per-pixel lists; processing splats
    // in depth order keeps each pixel's list composite-ordered.
    const std::size_t n_pixels = static_cast<std::size_t>(cam.width) * cam.height;
    std::vector<int> counts(n_pixels, 0);
    for (const int i : order) {
        const PixelSpan span = footprint(projected[i], cam.width, cam.height);
        if (span.empty) continue;
        for (int y = span.y0; y <= span.y1; ++y)
            for (int x = span.x0; x <= span.x1; ++x) ++counts[buffers.pixel(x, y)];
    }
    buffers.contrib_offsets.resize(n_pixels + 1);
    buffers.contrib_offsets[0] = 0;
    std::partial_sum(counts.begin(), counts.end(), buffers.contrib_offsets.begin() + 1);
    buffers.contrib_splats.resize(static_cast<std::size_t>(buffers.contrib_offsets.back()));
    std::vector<int> cursor(buffers.contrib_offsets.begin(), buffers.contrib_offsets.end() - 1);
    for (const int i : order) {
        const PixelSpan span = footprint(projected[i], cam.width, cam.height);
        if (span.empty) continue;
        for (int y = span.y0; y <= span.y1; ++y)
            for (int x = span.x0; x <= span.x1; ++x)
                buffers.contrib_splats[static_cast<std::size_t>(cursor[buffers.pixel(x, y)]++)] = i;
    }
    buffers.has_contributors = true;

    const double cutoff2 = config.cutoff * config.cutoff;
    parallel_for_blocks(
        static_cast<std::int64_t>(n_pixels), config.threads,
        [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t p = lo; p < hi; ++p) {
                const int x = static_cast<int>(p) % cam.width;
                const int y = static_cast<int>(p) / cam.width;
                const int* begin = buffers.contrib_splats.data() + buffers.contrib_offsets[p];
                const int* end = buffers.contrib_splats.data() + buffers.contrib_offsets[p + 1];
                composite_pixel(projected, begin, end, x + 0.5, y + 0.5, config.opacity,
                                cutoff2, buffers.silhouette[p], buffers.direction[p],
                                buffers.depth[p]);
                buffers.coverage[p] = buffers.silhouette[p] > 0.0 ? 1 : 0;
            }
        });
    return buffers;
}

RenderBuffers reference_rasterize(const std::vector<StrandSplat>& splats,
                                  const CameraModel& cam, const RenderConfig& config) {
    RenderBuffers buffers;
    init_buffers(buffers, cam);
    const std::vector<ProjectedSplat> projected = project_splats(splats, cam, config);
    const std::vector<int> order = depth_order(projected);
    const double cutoff2 = config.cutoff * config.cutoff;
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const int p = buffers.pixel(x, y);
            composite_pixel(projected, order.data(), order.data() + order.size(), x + 0.5,
                            y + 0.5, config.opacity, cutoff2, buffers.silhouette[p],
                            buffers.direction[p], buffers.depth[p]);
            buffers.coverage[p] = buffers.silhouette[p] > 0.0 ? 1 : 0;
        }
    return buffers;
}

PointGradients rasterize_backward(const RenderBuffers& buffers,
                                  const RenderGradients& upstream,
                                  const std::vector<StrandSplat>& splats,
                                  const HairMap& hair, const CameraModel& cam,
                                  const RenderConfig& config) {
    if (!buffers.has_contributors)
        throw std::runtime_error("rasterize_backward: contributor lists missing");
    const std::vector<ProjectedSplat> projected = project_splats(splats, cam, config);
    const std::size_t n_pixels = static_cast<std::size_t>(buffers.width) * buffers.height;
    const bool has_sil = !upstream.silhouette.empty();
    const bool has_dir = !upstream.direction.empty();
    const bool has_depth = !upstream.depth.empty();
    if (has_sil && upstream.silhouette.size() != n_pixels)
        throw std::invalid_argument("rasterize_backward: silhouette gradient size mismatch");
    if (has_dir && upstream.direction.size() != n_pixels)
        throw std::invalid_argument("rasterize_backward: direction gradient size mismatch");
    if (has_depth && upstream.depth.size() != n_pixels)
        throw std::invalid_argument("rasterize_backward: depth gradient size mismatch");

    // Screen-space gradient slots per splat.
    std::vector<Eigen::Vector2d> g_proj(splats.size(), Eigen::Vector2d::Zero());
    std::vector<Eigen::Matrix2d> g_cov2d(splats.size(), Eigen::Matrix2d::Zero());
    std::vector<Eigen::Vector2d> g_dir2d(splats.size(), Eigen::Vector2d::Zero());
    std::vector<double> g_depth(splats.size(), 0.0);

    const double cutoff2 = config.cutoff * config.cutoff;
    std::vector<int> live;
    std::vector<double> alphas, trans;
    for (std::size_t p = 0; p < n_pixels; ++p) {
        const double gs = has_sil ? upstream.silhouette[p] : 0.0;
        const Eigen::Vector2d gd =
            has_dir ? upstream.direction[p] : Eigen::Vector2d::Zero();
        const double gz = has_depth ? upstream.depth[p] : 0.0;
        if (gs == 0.0 && gz == 0.0 && gd.isZero()) continue;
        const int* begin = buffers.contrib_splats.data() + buffers.contrib_offsets[p];
        const int* end = buffers.contrib_splats.data() + buffers.contrib_offsets[p + 1];
        if (begin == end) continue;
        const double px = static_cast<double>(p % buffers.width) + 0.5;
        const double py = static_cast<double>(p / buffers.width) + 0.5;

        // Forward replay to collect the live contributors and transmittance.
        live.clear();
        alphas.clear();
        trans.clear();
        double transmittance = 1.0;
        for (const int* it = begin; it != end; ++it) {
            const ProjectedSplat& ps = projected[*it];
            const Eigen::Vector2d delta(px - ps.proj.x(), py - ps.proj.y());
            const double m2 = delta.dot(ps.conic * delta);
            if (m2 > cutoff2) continue;
            const double alpha = config.opacity * std::exp(-0.5 * m2);
            live.push_back(*it);
            alphas.push_back(alpha);
            trans.push_back(transmittance);
            transmittance *= 1.0 - alpha;
        }

        // Back-to-front accumulation of the suffix sums.
        double suffix_s = 0.0, suffix_z = 0.0;
        Eigen::Vector2d suffix_d = Eigen::Vector2d::Zero();
        for (int n = static_cast<int>(live.size()) - 1; n >= 0; --n) {
            const int i = live[static_cast<std::size_t>(n)];
            const ProjectedSplat& ps = projected[i];
            const double alpha = alphas[static_cast<std::size_t>(n)];
            const double t_before = trans[static_cast<std::size_t>(n)];
            const double one_minus = 1.0 - alpha;

            double g_alpha = gs * t_before + gd.dot(t_before * ps.dir2d) + gz * t_before * ps.depth;
            if (one_minus > 1e-12)
                g_alpha -= (gs * suffix_s + gd.dot(suffix_d) + gz * suffix_z) / one_minus;

            const double w = t_before * alpha;
            g_dir2d[i] += gd * w;
            g_depth[i] += gz * w;

            const double g_m2 = -0.5 * alpha * g_alpha;
            const Eigen::Vector2d delta(px - ps.proj.x(), py - ps.proj.y());
            const Eigen::Vector2d conic_delta = ps.conic * delta;
            g_proj[i] -= 2.0 * g_m2 * conic_delta;  // d(delta)/d(proj) = -I
            g_cov2d[i] += -g_m2 * conic_delta * conic_delta.transpose();

            suffix_s += w;
            suffix_d += w * ps.dir2d;
            suffix_z += w * ps.depth;
        }
    }

    // Screen-space gradients back to the strand points.
    PointGradients grads(hair.texels());
    for (std::size_t i = 0; i < splats.size(); ++i) {
        const ProjectedSplat& ps = projected[i];
        if (!ps.valid) continue;
        if (g_proj[i].isZero() && g_cov2d[i].isZero() && g_dir2d[i].isZero() &&
            g_depth[i] == 0.0)
            continue;
        const StrandSplat& sp = splats[i];
        const Eigen::Vector3d& q = ps.q;
        Eigen::Matrix<double, 2, 3> jac = Eigen::Matrix<double, 2, 3>::Zero();
        jac(0, 0) = cam.fx / q.z();
        jac(0, 2) = -cam.fx * q.x() / (q.z() * q.z());
        jac(1, 1) = cam.fy / q.z();
        jac(1, 2) = -cam.fy * q.y() / (q.z() * q.z());

        const Eigen::Matrix3d cam_cov =
            cam.rotation * sp.covariance * cam.rotation.transpose();
        const Eigen::Vector3d cam_dir = cam.rotation * sp.direction;

        // Normalized screen tangent back through the normalization.
        Eigen::Vector2d g_raw = Eigen::Vector2d::Zero();
        if (ps.dir_raw_norm >= kDirDegenerate)
            g_raw = (Eigen::Matrix2d::Identity() - ps.dir2d * ps.dir2d.transpose()) *
                    g_dir2d[i] / ps.dir_raw_norm;

        // dL/dJ collects the covariance path and the tangent path.
        Eigen::Matrix<double, 2, 3> g_jac =
            2.0 * g_cov2d[i].selfadjointView<Eigen::Upper>() * jac * cam_cov;
        g_jac += g_raw * cam_dir.transpose();

        // Camera-space gradients.
        Eigen::Vector3d g_q = jac.transpose() * g_proj[i];
        g_q.z() += g_depth[i];
        const double z2 = q.z() * q.z();
        const double z3 = z2 * q.z();
        g_q.x() += g_jac(0, 2) * (-cam.fx / z2);
        g_q.y() += g_jac(1, 2) * (-cam.fy / z2);
        g_q.z() += g_jac(0, 0) * (-cam.fx / z2) + g_jac(1, 1) * (-cam.fy / z2) +
                   g_jac(0, 2) * (2.0 * cam.fx * q.x() / z3) +
                   g_jac(1, 2) * (2.0 * cam.fy * q.y() / z3);

        const Eigen::Vector3d g_mean = cam.rotation.transpose() * g_q;
        const Eigen::Matrix3d g_cov_world =
            cam.rotation.transpose() *
            (jac.transpose() * g_cov2d[i].selfadjointView<Eigen::Upper>() * jac) *
            cam.rotation;
        Eigen::Vector3d g_dir_world = cam.rotation.transpose() * (jac.transpose() * g_raw);

        // covariance = eps^2 I + (d^2 - eps^2) b b^T
        const double d2_minus = sp.major_sigma * sp.major_sigma -
                                config.epsilon * config.epsilon;
        const Eigen::Matrix3d g_cov_sym =
            0.5 * (g_cov_world + g_cov_world.transpose());
        g_dir_world += 2.0 * d2_minus * (g_cov_sym * sp.direction);
        const double g_major =
            2.0 * sp.major_sigma * sp.direction.dot(g_cov_sym * sp.direction);
        const double g_len = config.width_scale * g_major;

        // b = v / |v|, mean = (p0 + p1) / 2.
        const Eigen::Vector3d g_v =
            (Eigen::Matrix3d::Identity() - sp.direction * sp.direction.transpose()) *
                g_dir_world / sp.seg_length +
            g_len * sp.direction;

        auto& slot = grads[sp.texel];
        if (slot.empty())
            slot.assign(hair.strands[sp.texel].points.size(), Eigen::Vector3d::Zero());
        slot[sp.segment] += 0.5 * g_mean - g_v;
        slot[sp.segment + 1] += 0.5 * g_mean + g_v;
    }
    return grads;
}

std::vector<std::vector<double>> visibility_weights(const HairMap& hair,
                                                    const CameraModel& cam,
                                                    const RenderConfig& config) {
    const std::vector<StrandSplat> splats = build_splats(hair, config);
    const std::vector<ProjectedSplat> projected = project_splats(splats, cam, config);
    const std::vector<int> order = depth_order(projected);
    const double cutoff2 = config.cutoff * config.cutoff;

    // Transmittance in front of each splat at its own center pixel.
    std::vector<double> trans_before(splats.size(), -1.0);
    std::vector<std::vector<int>> per_pixel(static_cast<std::size_t>(cam.width) * cam.height);
    for (const int i : order) {
        const ProjectedSplat& ps = projected[i];
        const int x = static_cast<int>(std::floor(ps.proj.x()));
        const int y = static_cast<int>(std::floor(ps.proj.y()));
        if (x < 0 || x >= cam.width || y < 0 || y >= cam.height) continue;
        per_pixel[static_cast<std::size_t>(y) * cam.width + x].push_back(i);
    }
    for (std::size_t p = 0; p < per_pixel.size(); ++p) {
        if (per_pixel[p].empty()) continue;
        const double px = static_cast<double>(p % cam.width) + 0.5;
        const double py = static_cast<double>(p / cam.width) + 0.5;
        // March all splats at this pixel in depth order, recording the
        // transmittance right before each owned splat contributes. The owned
        // list was filled in the same global order, so a single cursor syncs.
        std::size_t next_owned = 0;
        double transmittance = 1.0;
        for (const int i : order) {
            if (next_owned < per_pixel[p].size() && per_pixel[p][next_owned] == i) {
                trans_before[i] = transmittance;
                ++next_owned;
            }
            const ProjectedSplat& ps = projected[i];
            const Eigen::Vector2d delta(px - ps.proj.x(), py - ps.proj.y());
            const double m2 = delta.dot(ps.conic * delta);
            if (m2 > cutoff2) continue;
            transmittance *= 1.0 - config.opacity * std::exp(-0.5 * m2);
        }
    }

    // Segment splat lookup per texel.
    std::vector<std::vector<int>> seg_splat(hair.texels());
    for (std::size_t i = 0; i < splats.size(); ++i) {
        auto& slots = seg_splat[splats[i].texel];
        if (slots.empty())
            slots.assign(hair.strands[splats[i].texel].points.size(), -1);
        slots[splats[i].segment] = static_cast<int>(i);
    }

    std::vector<std::vector<double>> weights(hair.texels());
    for (int t = 0; t < hair.texels(); ++t) {
        if (!hair.active[t]) continue;
        const Strand& s = hair.strands[t];
        weights[t].assign(s.points.size(), 1.0);
        for (int j = 0; j < s.size(); ++j) {
            const Projection pr = project(cam, s.points[j]);
            if (!pr.valid || pr.pixel.x() < 0.0 || pr.pixel.x() >= cam.width ||
                pr.pixel.y() < 0.0 || pr.pixel.y() >= cam.height)
                continue;
            const int seg = std::min(j, s.size() - 2);
            const int splat = seg_splat[t].empty() ? -1 : seg_splat[t][seg];
            if (splat >= 0 && trans_before[splat] >= 0.5) weights[t][j] = 3.0;
        }
    }
    return weights;
}

namespace {

void hsv_to_rgb(double h, double s, double v, std::uint8_t rgb[3]) {
    const double c = v * s;
    const double hp = h * 6.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else { r = c; b = x; }
    const double m = v - c;
    rgb[0] = static_cast<std::uint8_t>(std::clamp((r + m) * 255.0, 0.0, 255.0));
    rgb[1] = static_cast<std::uint8_t>(std::clamp((g + m) * 255.0, 0.0, 255.0));
    rgb[2] = static_cast<std::uint8_t>(std::clamp((b + m) * 255.0, 0.0, 255.0));
}

}  // namespace

void save_buffers(const std::string& dir_path, const RenderBuffers& buffers) {
    PlanarImage sil(buffers.width, buffers.height, 1);
    sil.data.assign(buffers.silhouette.begin(), buffers.silhouette.end());
    write_pfm(dir_path + "/silhouette.pfm", sil);

    PlanarImage dir(buffers.width, buffers.height, 2);
    for (int y = 0; y < buffers.height; ++y)
        for (int x = 0; x < buffers.width; ++x) {
            dir.at(x, y, 0) = buffers.direction[buffers.pixel(x, y)].x();
            dir.at(x, y, 1) = buffers.direction[buffers.pixel(x, y)].y();
        }
    write_pfm(dir_path + "/direction.pfm", dir);

    PlanarImage depth(buffers.width, buffers.height, 1);
    depth.data.assign(buffers.depth.begin(), buffers.depth.end());
    write_pfm(dir_path + "/depth.pfm", depth);
}

void save_direction_debug_png(const std::string& path, const RenderBuffers& buffers) {
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(buffers.width) * buffers.height * 3,
                                  0);
    for (std::size_t p = 0; p < buffers.direction.size(); ++p) {
        const Eigen::Vector2d& d = buffers.direction[p];
        const double mag = d.norm();
        if (mag < 1e-9) continue;
        double angle = std::atan2(d.y(), d.x());
        if (angle < 0) angle += 2.0 * std::numbers::pi;
        hsv_to_rgb(angle / (2.0 * std::numbers::pi), 1.0, std::min(1.0, mag), &rgb[3 * p]);
    }
    write_png_rgb(path, buffers.width, buffers.height, rgb);
}

}  // namespace hairkit
