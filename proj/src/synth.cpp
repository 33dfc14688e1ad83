// SPDX-License-Identifier: Apache-2.0
#include "hairkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hairkit {

std::vector<Strand> gen_strand_corpus(unsigned seed, int count, const CorpusParams& params) {
    if (count < 1) throw std::invalid_argument("gen_strand_corpus: count must be >= 1");
    if (params.length < 2) throw std::invalid_argument("gen_strand_corpus: length must be >= 2");
    if (params.droop_max >= 0.5 * std::numbers::pi)
        throw std::invalid_argument("gen_strand_corpus: droop must stay below pi/2");
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Strand> corpus(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double length =
            params.min_length + unit(rng) * (params.max_length - params.min_length);
        const double amp =
            params.wave_amp_min + unit(rng) * (params.wave_amp_max - params.wave_amp_min);
        const double freq =
            params.wave_freq_min + unit(rng) * (params.wave_freq_max - params.wave_freq_min);
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        const double droop = unit(rng) * params.droop_max;
        const double droop_az = 2.0 * std::numbers::pi * unit(rng);
        const double wave_az = 2.0 * std::numbers::pi * unit(rng);

        Strand& s = corpus[static_cast<std::size_t>(i)];
        s.points.resize(params.length);
        const double step = length / (params.length - 1);
        const Eigen::Vector2d droop_dir(std::cos(droop_az), std::sin(droop_az));
        const Eigen::Vector2d wave_a(std::cos(wave_az), std::sin(wave_az));
        const Eigen::Vector2d wave_b(-std::sin(wave_az), std::cos(wave_az));
        Eigen::Vector3d base = Eigen::Vector3d::Zero();
        for (int j = 0; j < params.length; ++j) {
            if (j > 0) {
                // Tilt grows linearly along the strand; z keeps increasing.
                const double t = (j - 0.5) / (params.length - 1);
                const double tilt = droop * t;
                base += step * Eigen::Vector3d(std::sin(tilt) * droop_dir.x(),
                                               std::sin(tilt) * droop_dir.y(), std::cos(tilt));
            }
            const double arc = static_cast<double>(j) / (params.length - 1);
            const double damp = (1.0 - std::exp(-4.0 * arc)) * std::exp(-arc);
            const double w = 2.0 * std::numbers::pi * freq * arc;
            const Eigen::Vector2d lateral = amp * damp *
                                            (std::sin(w + phase) * wave_a +
                                             std::cos(w + phase) * 0.6 * wave_b);
            s.points[j] = base + Eigen::Vector3d(lateral.x(), lateral.y(), 0.0);
        }
    }
    return corpus;
}

Eigen::VectorXd coefficient_stddev(const std::vector<Strand>& corpus,
                                   const StrandBasis& basis) {
    if (corpus.empty()) throw std::invalid_argument("coefficient_stddev: empty corpus");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(basis.num_components());
    Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(basis.num_components());
    for (const auto& s : corpus) {
        const Eigen::VectorXd g = encode_strand(s, basis).gamma;
        sum += g;
        sum2 += g.cwiseProduct(g);
    }
    const double n = static_cast<double>(corpus.size());
    const Eigen::VectorXd var = (sum2 / n - (sum / n).cwiseProduct(sum / n)).cwiseMax(0.0);
    return var.cwiseSqrt();
}

DepthNormalization normalize_rendered_depth(const RenderBuffers& buffers,
                                            std::vector<double>& out_depth) {
    DepthNormalization norm;
    out_depth.assign(buffers.depth.size(), 0.0);
    for (std::size_t p = 0; p < buffers.depth.size(); ++p) {
        if (buffers.silhouette[p] <= 0.5) continue;
        if (norm.argmin < 0 || buffers.depth[p] < norm.min) {
            norm.min = buffers.depth[p];
            norm.argmin = static_cast<int>(p);
        }
        if (norm.argmax < 0 || buffers.depth[p] > norm.max) {
            norm.max = buffers.depth[p];
            norm.argmax = static_cast<int>(p);
        }
    }
    if (norm.argmin < 0 || norm.max - norm.min <= 0.0) return norm;
    norm.valid = true;
    for (std::size_t p = 0; p < buffers.depth.size(); ++p)
        if (buffers.silhouette[p] > 0.5)
            out_depth[p] = (buffers.depth[p] - norm.min) / (norm.max - norm.min);
    return norm;
}

TargetMaps render_targets(const PcaHairMap& map, const StrandBasis& basis,
                          const HeadModel& head, const CameraModel& cam,
                          const SceneParams& params) {
    const RootGrid guide_roots = RootGrid::from_head(head, map.width, map.height);
    const HairMap guides = decode_map(map, basis, guide_roots);
    const RootGrid dense_roots = RootGrid::from_head(head, map.width * params.upsample_x,
                                                     map.height * params.upsample_y);
    const HairMap dense = upsample_guides(guides, guide_roots, dense_roots,
                                          params.nearest_weight);
    const auto splats = build_splats(dense, params.render);
    const RenderBuffers buffers = reference_rasterize(splats, cam, params.render);

    TargetMaps targets;
    targets.width = buffers.width;
    targets.height = buffers.height;
    targets.silhouette = buffers.silhouette;
    targets.direction = buffers.direction;
    std::vector<double> normalized;
    normalize_rendered_depth(buffers, normalized);
    targets.depth = normalized;
    targets.depth_valid.assign(buffers.depth.size(), 0);
    for (std::size_t p = 0; p < buffers.depth.size(); ++p)
        targets.depth_valid[p] = buffers.silhouette[p] > 0.5 ? 1 : 0;
    return targets;
}

SynthScene gen_scene(unsigned seed, const HeadModel& head, int grid_width, int grid_height,
                     const StrandBasis& basis, const Eigen::VectorXd& coeff_stddev,
                     const SceneParams& params) {
    if (coeff_stddev.size() != basis.num_components())
        throw std::invalid_argument("gen_scene: stddev size does not match basis");
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SynthScene scene;
    scene.head = head;
    PcaHairMap& map = scene.ground_truth;
    map = PcaHairMap(grid_width, grid_height, basis.num_components());
    std::fill(map.baldness.begin(), map.baldness.end(), 1.0);
    for (int t = 0; t < map.texels(); ++t)
        for (int c = 0; c < map.num_components(); ++c) {
            const double sigma = coeff_stddev(c);
            const double v = gauss(rng) * sigma;
            map.coeffs(t, c) = std::clamp(v, -params.coeff_clip_sigma * sigma,
                                          params.coeff_clip_sigma * sigma);
        }

    // Box blurs keep neighboring strands coherent; variance is restored per
    // component afterwards so the map stays in-distribution.
    for (int pass = 0; pass < params.smooth_passes; ++pass) {
        Eigen::MatrixXd blurred = map.coeffs;
        for (int y = 0; y < grid_height; ++y)
            for (int x = 0; x < grid_width; ++x) {
                Eigen::RowVectorXd acc =
                    Eigen::RowVectorXd::Zero(map.num_components());
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= grid_width || ny >= grid_height)
                            continue;
                        acc += map.coeffs.row(map.index(nx, ny));
                        ++n;
                    }
                blurred.row(map.index(x, y)) = acc / n;
            }
        map.coeffs = blurred;
    }
    for (int c = 0; c < map.num_components(); ++c) {
        const double sigma = coeff_stddev(c);
        if (sigma <= 0.0) continue;
        const double actual =
            std::sqrt(map.coeffs.col(c).squaredNorm() / map.texels());
        if (actual > 1e-12) map.coeffs.col(c) *= 0.8 * sigma / actual;
        const double clip = params.coeff_clip_sigma * sigma;
        map.coeffs.col(c) = map.coeffs.col(c).cwiseMax(-clip).cwiseMin(clip);
    }

    // Shrink any texel whose decoded strand dips inside the head; gamma -> 0
    // converges to the (penetration-free) mean strand.
    const RootGrid roots = RootGrid::from_head(head, grid_width, grid_height);
    for (int iter = 0; iter < 60; ++iter) {
        const HairMap decoded = decode_map(map, basis, roots);
        bool any = false;
        for (int t = 0; t < map.texels(); ++t) {
            if (!decoded.active[t]) continue;
            for (const auto& p : decoded.strands[t].points)
                if (head_sdf(head, p) < 0.0) {
                    map.coeffs.row(t) *= 0.7;
                    any = true;
                    break;
                }
        }
        if (!any) break;
    }

    // Hemisphere camera looking at the head center.
    const double elev = params.elevation_min +
                        unit(rng) * (params.elevation_max - params.elevation_min);
    const double azim = 2.0 * std::numbers::pi * unit(rng);
    const double dist = params.camera_distance_factor * head.radii.maxCoeff();
    const Eigen::Vector3d eye =
        head.center + dist * Eigen::Vector3d(std::cos(elev) * std::cos(azim),
                                             std::cos(elev) * std::sin(azim), std::sin(elev));
    // Focal length framing the head plus hair margin.
    const double subject = 2.2 * head.radii.maxCoeff();
    const double focal = params.framing * params.image_width * dist / subject;
    scene.camera = make_lookat_camera(eye, head.center, focal, params.image_width,
                                      params.image_height);
    scene.targets = render_targets(map, basis, head, scene.camera, params);
    return scene;
}

}  // namespace hairkit
