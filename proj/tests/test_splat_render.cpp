// SPDX-License-Identifier: Apache-2.0
#include "hairkit/splat_render.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <numbers>
#include <random>

using namespace hairkit;
using namespace hairkit::testing;

namespace {

/// Hair map holding loose strands (one texel per strand, no scalp).
HairMap loose_map(std::vector<Strand> strands) {
    HairMap map;
    map.width = static_cast<int>(strands.size());
    map.height = 1;
    map.active.assign(strands.size(), 1);
    map.strands = std::move(strands);
    return map;
}

CameraModel front_camera(int size = 32, double focal = 40.0, double principal = -1.0) {
    CameraModel cam;
    cam.fx = cam.fy = focal;
    cam.cx = cam.cy = principal < 0 ? size * 0.5 : principal;
    cam.width = cam.height = size;
    return cam;  // identity pose: looking down +z
}

/// Random scene with strictly separated splat depths so that FD probes never
/// cross an ordering change.
HairMap random_scene(std::mt19937& rng, int strands, int points, double depth_gap = 0.02) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<Strand> list;
    double depth = 2.0;
    for (int i = 0; i < strands; ++i) {
        Strand s;
        for (int j = 0; j < points; ++j) {
            s.points.push_back(Eigen::Vector3d(0.35 * unit(rng), 0.35 * unit(rng), depth));
            depth += depth_gap * (1.0 + 0.3 * unit(rng));
        }
        list.push_back(std::move(s));
    }
    return loose_map(std::move(list));
}

RenderConfig smooth_config() {
    RenderConfig config;
    config.width_scale = 0.4;
    config.epsilon = 0.02;
    config.opacity = 0.6;
    config.cutoff = 1e3;  // effectively untruncated: keeps the field smooth
    return config;
}

double buffers_max_diff(const RenderBuffers& a, const RenderBuffers& b) {
    double worst = 0.0;
    for (std::size_t p = 0; p < a.silhouette.size(); ++p) {
        worst = std::max(worst, std::abs(a.silhouette[p] - b.silhouette[p]));
        worst = std::max(worst, (a.direction[p] - b.direction[p]).cwiseAbs().maxCoeff());
        worst = std::max(worst, std::abs(a.depth[p] - b.depth[p]));
    }
    return worst;
}

}  // namespace

TEST_CASE("build_splats constructs the constrained covariance") {
    SUBCASE("unit segment along x") {
        Strand s;
        s.points = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0)};
        RenderConfig config;
        config.width_scale = 0.5;
        config.epsilon = 0.01;
        const auto splats = build_splats(loose_map({s}), config);
        REQUIRE(splats.size() == 1);
        CHECK((splats[0].mean - Eigen::Vector3d(0.5, 0, 0)).norm() < 1e-15);
        CHECK((splats[0].direction - Eigen::Vector3d(1, 0, 0)).norm() < 1e-15);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(splats[0].covariance);
        CHECK(eig.eigenvalues()(0) == doctest::Approx(1e-4).epsilon(1e-10));
        CHECK(eig.eigenvalues()(1) == doctest::Approx(1e-4).epsilon(1e-10));
        CHECK(eig.eigenvalues()(2) == doctest::Approx(0.25).epsilon(1e-12));
        // Major axis parallel to the segment.
        CHECK(std::abs(eig.eigenvectors().col(2).dot(Eigen::Vector3d::UnitX())) >
              1.0 - 1e-9);
    }
    SUBCASE("rotation equivariance") {
        std::mt19937 rng(211);
        const Strand s = random_strand(rng, 6);
        RenderConfig config;
        config.width_scale = 0.3;
        config.epsilon = 0.02;
        const auto base = build_splats(loose_map({s}), config);
        const Eigen::Matrix3d rot =
            Eigen::AngleAxisd(0.83, Eigen::Vector3d(1, 2, -1).normalized()).toRotationMatrix();
        Strand rotated = s;
        for (auto& p : rotated.points) p = rot * p;
        const auto moved = build_splats(loose_map({rotated}), config);
        REQUIRE(base.size() == moved.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
            CHECK((moved[i].mean - rot * base[i].mean).cwiseAbs().maxCoeff() < 1e-10);
            const Eigen::Matrix3d expect = rot * base[i].covariance * rot.transpose();
            CHECK((moved[i].covariance - expect).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
    SUBCASE("zero-length segments are skipped and counted") {
        Strand s;
        s.points = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0),
                    Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(2, 0, 0)};
        int skipped = 0;
        const auto splats = build_splats(loose_map({s}), RenderConfig{}, &skipped);
        CHECK(splats.size() == 2);
        CHECK(skipped == 1);
    }
    SUBCASE("empty map rejected") {
        HairMap empty;
        empty.width = empty.height = 2;
        empty.strands.resize(4);
        empty.active.assign(4, 0);
        CHECK_THROWS_AS(build_splats(empty, RenderConfig{}), std::invalid_argument);
    }
}

TEST_CASE("rasterize compositing algebra") {
    const CameraModel cam = front_camera(9, 30.0);
    // One short segment centered on the middle pixel, tangent along x.
    auto one_splat_map = [&](double z) {
        Strand s;
        const Eigen::Vector3d c = unproject(cam, Eigen::Vector2d(4.5, 4.5), z);
        s.points = {c - Eigen::Vector3d(0.05, 0, 0), c + Eigen::Vector3d(0.05, 0, 0)};
        return loose_map({s});
    };
    RenderConfig config;
    config.width_scale = 0.5;
    config.epsilon = 0.02;
    config.cutoff = 1e6;

    SUBCASE("single splat with opacity 1 saturates its center pixel") {
        config.opacity = 1.0;
        const auto buffers =
            rasterize(build_splats(one_splat_map(2.0), config), cam, config);
        CHECK(buffers.silhouette[buffers.pixel(4, 4)] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("two half-opacity splats at the same depth composite to 0.75") {
        config.opacity = 0.5;
        HairMap map = one_splat_map(2.0);
        HairMap second = one_splat_map(2.0);
        map.width = 2;
        map.strands.push_back(second.strands[0]);
        map.active.push_back(1);
        const auto buffers = rasterize(build_splats(map, config), cam, config);
        CHECK(buffers.silhouette[buffers.pixel(4, 4)] ==
              doctest::Approx(0.75).epsilon(1e-12));
    }
    SUBCASE("empty splat list gives zero buffers") {
        const auto buffers = rasterize({}, cam, config);
        for (const double v : buffers.silhouette) CHECK(v == 0.0);
        for (const double v : buffers.depth) CHECK(v == 0.0);
    }
}

TEST_CASE("rasterize agrees with the reference oracle on random scenes") {
    std::mt19937 rng(223);
    const CameraModel cam = front_camera(32, 40.0);
    double worst = 0.0;
    for (int scene = 0; scene < 12; ++scene) {
        RenderConfig config;
        config.width_scale = 0.3 + 0.2 * (scene % 3);
        config.epsilon = 0.01 + 0.01 * (scene % 2);
        config.opacity = 0.4 + 0.15 * (scene % 4);
        config.cutoff = 3.0;
        const HairMap map = random_scene(rng, 6, 6, 0.05);  // ~30 splats
        const auto splats = build_splats(map, config);
        const auto fast = rasterize(splats, cam, config);
        const auto slow = reference_rasterize(splats, cam, config);
        worst = std::max(worst, buffers_max_diff(fast, slow));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("reference rasterizer matches the closed-form footprint") {
    // Axis-aligned splat: direction x, camera identity. The projected
    // covariance is diag(fx^2 d^2, fy^2 eps^2) / z^2 and the footprint is
    // opacity * exp(-(dx^2/a + dy^2/b)/2).
    CameraModel cam = front_camera(16, 24.0, 8.0);
    RenderConfig config;
    config.width_scale = 0.5;
    config.epsilon = 0.05;
    config.opacity = 0.8;
    config.cutoff = 1e6;
    const double z = 2.0;
    Strand s;
    s.points = {Eigen::Vector3d(-0.2, 0, z), Eigen::Vector3d(0.2, 0, z)};
    const auto splats = build_splats(loose_map({s}), config);
    REQUIRE(splats.size() == 1);
    const auto buffers = reference_rasterize(splats, cam, config);

    const double d = 0.5 * 0.4;  // width_scale * |v|
    const double var_x = 24.0 * 24.0 * d * d / (z * z);
    const double var_y = 24.0 * 24.0 * config.epsilon * config.epsilon / (z * z);
    const int probes[5][2] = {{8, 8}, {9, 8}, {11, 8}, {8, 9}, {10, 9}};
    for (const auto& probe : probes) {
        const double dx = probe[0] + 0.5 - 8.0;
        const double dy = probe[1] + 0.5 - 8.0;
        const double expect =
            0.8 * std::exp(-0.5 * (dx * dx / var_x + dy * dy / var_y));
        CHECK(buffers.silhouette[buffers.pixel(probe[0], probe[1])] ==
              doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("silhouette bounds, monotone compositing, direction norms") {
    std::mt19937 rng(227);
    const CameraModel cam = front_camera(24, 30.0);
    RenderConfig config;
    config.opacity = 0.9;
    config.epsilon = 0.03;
    const HairMap map = random_scene(rng, 8, 5, 0.03);
    auto splats = build_splats(map, config);
    const auto buffers = rasterize(splats, cam, config);
    for (std::size_t p = 0; p < buffers.silhouette.size(); ++p) {
        CHECK(buffers.silhouette[p] >= 0.0);
        CHECK(buffers.silhouette[p] <= 1.0);
        CHECK(buffers.direction[p].norm() <= 1.0 + 1e-12);
        if (buffers.silhouette[p] == 0.0) {
            CHECK(buffers.coverage[p] == 0);
            CHECK(buffers.direction[p].norm() == 0.0);
        }
    }
    // Adding one more splat never decreases silhouette anywhere.
    Strand extra;
    extra.points = {Eigen::Vector3d(0, 0, 2.5), Eigen::Vector3d(0.1, 0, 2.51)};
    HairMap bigger = map;
    bigger.width += 1;
    bigger.strands.push_back(extra);
    bigger.active.push_back(1);
    const auto more = rasterize(build_splats(bigger, config), cam, config);
    for (std::size_t p = 0; p < buffers.silhouette.size(); ++p)
        CHECK(more.silhouette[p] >= buffers.silhouette[p] - 1e-12);
}

TEST_CASE("rasterize is deterministic under input permutation (distinct depths)") {
    std::mt19937 rng(229);
    const CameraModel cam = front_camera(24, 30.0);
    const RenderConfig config = smooth_config();
    const HairMap map = random_scene(rng, 6, 5, 0.04);
    auto splats = build_splats(map, config);
    const auto base = rasterize(splats, cam, config);
    std::shuffle(splats.begin(), splats.end(), rng);
    const auto shuffled = rasterize(splats, cam, config);
    CHECK(buffers_max_diff(base, shuffled) == 0.0);
}

namespace {

/// L2 losses against fixed targets on all three channels; returns value and
/// the upstream pixel gradients.
double buffer_objective(const RenderBuffers& buffers, const RenderBuffers& target,
                        RenderGradients* upstream) {
    double value = 0.0;
    if (upstream) {
        upstream->silhouette.assign(buffers.silhouette.size(), 0.0);
        upstream->direction.assign(buffers.silhouette.size(), Eigen::Vector2d::Zero());
        upstream->depth.assign(buffers.silhouette.size(), 0.0);
    }
    for (std::size_t p = 0; p < buffers.silhouette.size(); ++p) {
        const double ds = buffers.silhouette[p] - target.silhouette[p];
        const Eigen::Vector2d dd = buffers.direction[p] - target.direction[p];
        const double dz = buffers.depth[p] - target.depth[p];
        value += ds * ds + dd.squaredNorm() + 0.2 * dz * dz;
        if (upstream) {
            upstream->silhouette[p] = 2.0 * ds;
            upstream->direction[p] = 2.0 * dd;
            upstream->depth[p] = 0.4 * dz;
        }
    }
    return value;
}

}  // namespace

TEST_CASE("backward matches central finite differences") {
    std::mt19937 rng(233);
    const CameraModel cam = front_camera(16, 22.0);
    const RenderConfig config = smooth_config();

    const HairMap map = random_scene(rng, 3, 4, 0.05);
    // Target: the same scene nudged, so gradients are generic.
    HairMap target_map = map;
    for (auto& s : target_map.strands)
        for (auto& p : s.points) p += Eigen::Vector3d(0.03, -0.02, 0.0);
    const auto target =
        rasterize(build_splats(target_map, config), cam, config);

    const auto splats = build_splats(map, config);
    const auto buffers = rasterize(splats, cam, config);
    RenderGradients upstream;
    buffer_objective(buffers, target, &upstream);
    const PointGradients grads =
        rasterize_backward(buffers, upstream, splats, map, cam, config);

    const double h = 1e-5;
    int checked = 0, good = 0;
    for (int t = 0; t < map.texels(); ++t) {
        for (int j = 0; j < map.strands[t].size(); ++j)
            for (int axis = 0; axis < 3; ++axis) {
                HairMap plus = map, minus = map;
                plus.strands[t].points[j][axis] += h;
                minus.strands[t].points[j][axis] -= h;
                const double fp = buffer_objective(
                    rasterize(build_splats(plus, config), cam, config), target, nullptr);
                const double fm = buffer_objective(
                    rasterize(build_splats(minus, config), cam, config), target, nullptr);
                const double fd = (fp - fm) / (2.0 * h);
                const double analytic = grads[t].empty() ? 0.0 : grads[t][j][axis];
                ++checked;
                if (std::abs(fd) < 1e-7 && std::abs(analytic) < 1e-7) {
                    ++good;
                    continue;
                }
                if (rel_error(analytic, fd, 1e-6) < 1e-3) ++good;
            }
    }
    // All coordinates participate in this scene.
    CHECK(checked >= 36);
    CHECK(good == checked);
}

TEST_CASE("backward edge cases") {
    std::mt19937 rng(239);
    const CameraModel cam = front_camera(16, 22.0);
    const RenderConfig config = smooth_config();
    const HairMap map = random_scene(rng, 2, 4, 0.05);
    const auto splats = build_splats(map, config);
    const auto buffers = rasterize(splats, cam, config);

    SUBCASE("zero upstream gives zero gradients") {
        RenderGradients upstream;
        upstream.silhouette.assign(buffers.silhouette.size(), 0.0);
        const PointGradients grads =
            rasterize_backward(buffers, upstream, splats, map, cam, config);
        for (const auto& slot : grads)
            for (const auto& g : slot) CHECK(g.norm() == 0.0);
    }
    SUBCASE("missing contributor lists are a state error") {
        RenderBuffers stripped = buffers;
        stripped.has_contributors = false;
        RenderGradients upstream;
        upstream.silhouette.assign(buffers.silhouette.size(), 1.0);
        CHECK_THROWS_AS(
            rasterize_backward(stripped, upstream, splats, map, cam, config),
            std::runtime_error);
    }
    SUBCASE("gradients are invariant under a rigid scene+camera translation") {
        RenderGradients upstream;
        upstream.silhouette.assign(buffers.silhouette.size(), 0.0);
        upstream.direction.assign(buffers.silhouette.size(), Eigen::Vector2d::Zero());
        upstream.depth.assign(buffers.silhouette.size(), 0.0);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        for (std::size_t p = 0; p < upstream.silhouette.size(); ++p) {
            upstream.silhouette[p] = unit(rng);
            upstream.direction[p] = Eigen::Vector2d(unit(rng), unit(rng));
        }
        const PointGradients base =
            rasterize_backward(buffers, upstream, splats, map, cam, config);

        const Eigen::Vector3d shift(0.37, -0.21, 0.53);
        HairMap moved = map;
        for (auto& s : moved.strands)
            for (auto& p : s.points) p += shift;
        CameraModel moved_cam = cam;
        // World-to-camera with the eye shifted by the same amount.
        moved_cam.translation = cam.translation - cam.rotation * shift;
        const auto moved_splats = build_splats(moved, config);
        const auto moved_buffers = rasterize(moved_splats, moved_cam, config);
        CHECK(buffers_max_diff(buffers, moved_buffers) < 1e-10);
        const PointGradients shifted =
            rasterize_backward(moved_buffers, upstream, moved_splats, moved, moved_cam,
                               config);
        for (int t = 0; t < map.texels(); ++t) {
            REQUIRE(base[t].size() == shifted[t].size());
            for (std::size_t j = 0; j < base[t].size(); ++j)
                CHECK((base[t][j] - shifted[t][j]).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("visibility weights") {
    const CameraModel cam = front_camera(32, 40.0);
    RenderConfig config;
    config.width_scale = 0.5;
    config.epsilon = 0.02;
    config.opacity = 0.95;

    auto cross_strand = [&](double z, double span, int points) {
        Strand s;
        for (int j = 0; j < points; ++j) {
            const double t = static_cast<double>(j) / (points - 1);
            s.points.push_back(Eigen::Vector3d(-span / 2 + span * t, 0.0, z));
        }
        return s;
    };

    SUBCASE("unoccluded strand gets weight 3 everywhere in frustum") {
        const HairMap map = loose_map({cross_strand(2.0, 0.8, 12)});
        const auto weights = visibility_weights(map, cam, config);
        REQUIRE(weights[0].size() == 12);
        for (int j = 0; j < 12; ++j) {
            const Projection pr = project(cam, map.strands[0].points[j]);
            const bool in_image = pr.valid && pr.pixel.x() >= 0 && pr.pixel.x() < 32 &&
                                  pr.pixel.y() >= 0 && pr.pixel.y() < 32;
            CHECK(weights[0][j] == (in_image ? 3.0 : 1.0));
        }
    }
    SUBCASE("strand behind an opaque wall gets weight 1") {
        std::vector<Strand> strands;
        // Dense wall of horizontal strands in front.
        for (int row = 0; row < 40; ++row) {
            Strand s;
            const double y = -0.5 + row * 0.025;
            for (int j = 0; j < 24; ++j)
                s.points.push_back(Eigen::Vector3d(-0.5 + j * 0.0435, y, 1.5));
            strands.push_back(std::move(s));
        }
        strands.push_back(cross_strand(2.5, 0.6, 10));
        const HairMap map = loose_map(std::move(strands));
        RenderConfig wall = config;
        wall.epsilon = 0.05;  // thick, overlapping wall splats
        const auto weights = visibility_weights(map, cam, wall);
        const auto& back = weights[map.texels() - 1];
        for (const double w : back) CHECK(w == 1.0);
        // Weights take only the values {1, 3}.
        for (const auto& slot : weights)
            for (const double w : slot) CHECK((w == 1.0 || w == 3.0));
    }
    SUBCASE("two-layer scene agrees with a ray-march oracle") {
        // Regular front curtain; back strands sit either exactly behind a
        // curtain strand or exactly mid-gap, so per-point visibility is
        // decisive rather than borderline.
        std::vector<Strand> strands;
        const double gap = 0.16;
        for (int i = 0; i < 8; ++i) {  // front layer, z ~ 1.6
            Strand s;
            const double y = -0.56 + i * gap;
            for (int j = 0; j < 16; ++j)
                s.points.push_back(Eigen::Vector3d(-0.45 + j * 0.06, y, 1.6 + 0.002 * i));
            strands.push_back(std::move(s));
        }
        for (int i = 0; i < 7; ++i) {  // back layer behind curtain strands
            Strand s;
            const double y = -0.56 + i * gap;
            for (int j = 0; j < 16; ++j)
                s.points.push_back(Eigen::Vector3d(-0.5 + j * 0.066, y, 2.4 + 0.002 * i));
            strands.push_back(std::move(s));
        }
        for (int i = 0; i < 7; ++i) {  // back layer in the gaps
            Strand s;
            const double y = -0.56 + gap / 2 + i * gap;
            for (int j = 0; j < 16; ++j)
                s.points.push_back(Eigen::Vector3d(-0.5 + j * 0.066, y, 2.6 + 0.002 * i));
            strands.push_back(std::move(s));
        }
        const HairMap map = loose_map(std::move(strands));
        const auto weights = visibility_weights(map, cam, config);

        // Oracle: per-point transmittance of all in-front splats at the
        // point's own pixel (the point's own segments excluded).
        const auto splats = build_splats(map, config);
        int agree = 0, total = 0;
        for (int t = 0; t < map.texels(); ++t)
            for (int j = 0; j < map.strands[t].size(); ++j) {
                const Eigen::Vector3d& point = map.strands[t].points[j];
                const Projection pr = project(cam, point);
                ++total;
                double expect = 1.0;
                if (pr.valid && pr.pixel.x() >= 0 && pr.pixel.x() < 32 &&
                    pr.pixel.y() >= 0 && pr.pixel.y() < 32) {
                    const double px = std::floor(pr.pixel.x()) + 0.5;
                    const double py = std::floor(pr.pixel.y()) + 0.5;
                    double transmittance = 1.0;
                    for (const auto& sp : splats) {
                        if (sp.texel == t && std::abs(sp.segment - j) <= 1) continue;
                        const Projection c = project(cam, sp.mean);
                        if (!c.valid || c.depth >= pr.depth - 1e-9) continue;
                        // 2D footprint of this splat at the probe pixel.
                        const Eigen::Vector3d q = cam.rotation * sp.mean + cam.translation;
                        Eigen::Matrix<double, 2, 3> jac = Eigen::Matrix<double, 2, 3>::Zero();
                        jac(0, 0) = cam.fx / q.z();
                        jac(0, 2) = -cam.fx * q.x() / (q.z() * q.z());
                        jac(1, 1) = cam.fy / q.z();
                        jac(1, 2) = -cam.fy * q.y() / (q.z() * q.z());
                        const Eigen::Matrix2d cov2 =
                            jac * (cam.rotation * sp.covariance * cam.rotation.transpose()) *
                            jac.transpose();
                        const Eigen::Vector2d delta(px - c.pixel.x(), py - c.pixel.y());
                        const double m2 = delta.dot(cov2.inverse() * delta);
                        if (m2 > config.cutoff * config.cutoff) continue;
                        transmittance *= 1.0 - config.opacity * std::exp(-0.5 * m2);
                    }
                    expect = transmittance >= 0.5 ? 3.0 : 1.0;
                }
                if (weights[t][j] == expect) ++agree;
            }
        CHECK(static_cast<double>(agree) / total >= 0.99);
    }
}
