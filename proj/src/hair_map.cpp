// SPDX-License-Identifier: Apache-2.0
#include "hairkit/hair_map.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace hairkit {

namespace {

static_assert(std::endian::native == std::endian::little,
              "hair map file I/O assumes a little-endian host");

constexpr char kHairMapMagic[5] = {'H', 'M', 'A', 'P', '1'};

}  // namespace

int HairMap::active_count() const {
    int n = 0;
    for (const auto a : active) n += a ? 1 : 0;
    return n;
}

RootGrid RootGrid::from_head(const HeadModel& head, int width, int height) {
    RootGrid grid;
    grid.width = width;
    grid.height = height;
    grid.positions.resize(static_cast<std::size_t>(width) * height);
    grid.frames.resize(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double u = (x + 0.5) / width;
            const double v = (y + 0.5) / height;
            const ScalpSample s = scalp_point(head, u, v);
            grid.positions[grid.index(x, y)] = s.position;
            grid.frames[grid.index(x, y)] = s.frame;
        }
    return grid;
}

HairMap decode_map(const PcaHairMap& pca, const StrandBasis& basis, const RootGrid& roots,
                   double bald_threshold) {
    if (pca.width != roots.width || pca.height != roots.height)
        throw std::invalid_argument("decode_map: map and root grid dimensions differ");
    if (pca.num_components() != basis.num_components())
        throw std::invalid_argument("decode_map: coefficient count does not match basis");

    const DecodeOperator op = build_decode_operator(basis);
    HairMap out;
    out.width = pca.width;
    out.height = pca.height;
    out.strands.resize(pca.texels());
    out.active.assign(pca.texels(), 0);
    const int length = basis.length;
    for (int t = 0; t < pca.texels(); ++t) {
        if (pca.baldness[t] < bald_threshold) continue;
        out.active[t] = 1;
        const Eigen::VectorXd local = op.matrix * pca.coeffs.row(t).transpose() + op.offset;
        Strand& strand = out.strands[t];
        strand.points.resize(length);
        const Eigen::Matrix3d& frame = roots.frames[t];
        const Eigen::Vector3d& root = roots.positions[t];
        for (int j = 0; j < length; ++j)
            strand.points[j] = frame * Eigen::Vector3d(local.segment<3>(3 * j)) + root;
    }
    return out;
}

Eigen::MatrixXd decode_map_vjp(const std::vector<std::vector<Eigen::Vector3d>>& point_grads,
                               const PcaHairMap& pca, const StrandBasis& basis,
                               const RootGrid& roots, double bald_threshold) {
    if (static_cast<int>(point_grads.size()) != pca.texels())
        throw std::invalid_argument("decode_map_vjp: gradient grid size mismatch");
    const DecodeOperator op = build_decode_operator(basis);
    Eigen::MatrixXd grads =
        Eigen::MatrixXd::Zero(pca.texels(), basis.num_components());
    Eigen::VectorXd local(3 * basis.length);
    for (int t = 0; t < pca.texels(); ++t) {
        if (pca.baldness[t] < bald_threshold || point_grads[t].empty()) continue;
        if (static_cast<int>(point_grads[t].size()) != basis.length)
            throw std::invalid_argument("decode_map_vjp: per-texel gradient length mismatch");
        const Eigen::Matrix3d& frame = roots.frames[t];
        for (int j = 0; j < basis.length; ++j)
            local.segment<3>(3 * j) = frame.transpose() * point_grads[t][j];
        grads.row(t) = (op.matrix.transpose() * local).transpose();
    }
    return grads;
}

PcaHairMap project_dataset(const std::vector<Strand>& strands,
                           const std::vector<Eigen::Vector2d>& root_uvs,
                           int width, int height, const StrandBasis& basis,
                           const HeadModel& head) {
    if (strands.size() != root_uvs.size())
        throw std::invalid_argument("project_dataset: strand and UV counts differ");
    PcaHairMap map(width, height, basis.num_components());
    if (strands.empty()) return map;  // all bald

    // Texel index per strand, then the nearest root per occupied texel.
    std::vector<int> best_strand(static_cast<std::size_t>(width) * height, -1);
    std::vector<double> best_dist(static_cast<std::size_t>(width) * height,
                                  std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < strands.size(); ++i) {
        const Eigen::Vector2d& uv = root_uvs[i];
        if (uv.x() < 0.0 || uv.x() >= 1.0 || uv.y() < 0.0 || uv.y() >= 1.0)
            throw std::invalid_argument("project_dataset: root UV outside [0,1)^2");
        const int x = std::min(width - 1, static_cast<int>(uv.x() * width));
        const int y = std::min(height - 1, static_cast<int>(uv.y() * height));
        const int t = map.index(x, y);
        const Eigen::Vector2d center((x + 0.5) / width, (y + 0.5) / height);
        const double d = (uv - center).squaredNorm();
        // Strict comparison keeps the lowest strand index on exact ties.
        if (best_strand[t] < 0 || d < best_dist[t]) {
            best_dist[t] = d;
            best_strand[t] = static_cast<int>(i);
        }
    }

    for (int t = 0; t < map.texels(); ++t) {
        const int i = best_strand[t];
        if (i < 0) continue;
        const Strand& s = strands[i];
        validate_strand(s);
        if (s.size() != basis.length)
            throw std::invalid_argument("project_dataset: strand length does not match basis");
        double u = 0.0, v = 0.0;
        scalp_uv_for_position(head, s.points.front(), u, v);
        const ScalpSample sample = scalp_point(head, u, v);
        Strand local;
        local.points.resize(s.size());
        for (int j = 0; j < s.size(); ++j)
            local.points[j] = sample.frame.transpose() * (s.points[j] - s.points.front());
        map.coeffs.row(t) = encode_strand(local, basis).gamma.transpose();
        map.baldness[t] = 1.0;
    }
    return map;
}

namespace {

struct BlendSource {
    int texel;
    double weight;
};

/// Nearest plus renormalized bilinear footprint of one target texel on the
/// guide grid. Only active guides participate; the nearest guide of an
/// active target texel is active by construction (baldness is
/// block-replicated from the nearest guide).
struct TexelBlend {
    int nearest = -1;
    std::vector<BlendSource> sources;  // combined weights, sums to 1
};

TexelBlend blend_for_target(const HairMap& guides, int gx_count, int gy_count, int tx, int ty,
                            int sx, int sy, double nearest_weight) {
    const double gx = (tx + 0.5) / sx - 0.5;
    const double gy = (ty + 0.5) / sy - 0.5;
    const int x0 = std::clamp(static_cast<int>(std::floor(gx)), 0, gx_count - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(gy)), 0, gy_count - 1);
    const int x1 = std::min(x0 + 1, gx_count - 1);
    const int y1 = std::min(y0 + 1, gy_count - 1);
    const double fx = std::clamp(gx - x0, 0.0, 1.0);
    const double fy = std::clamp(gy - y0, 0.0, 1.0);

    const int corners[4] = {guides.index(x0, y0), guides.index(x1, y0),
                            guides.index(x0, y1), guides.index(x1, y1)};
    const double weights[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};

    TexelBlend blend;
    const int nx = std::clamp(static_cast<int>(std::lround(gx)), 0, gx_count - 1);
    const int ny = std::clamp(static_cast<int>(std::lround(gy)), 0, gy_count - 1);
    blend.nearest = guides.index(nx, ny);
    if (!guides.active[blend.nearest]) return blend;  // target texel will be bald

    double active_sum = 0.0;
    for (int c = 0; c < 4; ++c)
        if (guides.active[corners[c]]) active_sum += weights[c];

    auto add = [&blend](int texel, double w) {
        if (w == 0.0) return;
        for (auto& s : blend.sources)
            if (s.texel == texel) {
                s.weight += w;
                return;
            }
        blend.sources.push_back({texel, w});
    };

    add(blend.nearest, nearest_weight);
    if (active_sum > 0.0) {
        for (int c = 0; c < 4; ++c)
            if (guides.active[corners[c]])
                add(corners[c], (1.0 - nearest_weight) * weights[c] / active_sum);
    } else {
        add(blend.nearest, 1.0 - nearest_weight);
    }
    return blend;
}

}  // namespace

HairMap upsample_guides(const HairMap& guides, const RootGrid& guide_roots,
                        const RootGrid& target_roots, double nearest_weight) {
    if (guides.width != guide_roots.width || guides.height != guide_roots.height)
        throw std::invalid_argument("upsample_guides: guide grid dimensions differ");
    if (target_roots.width % guides.width != 0 || target_roots.height % guides.height != 0)
        throw std::invalid_argument(
            "upsample_guides: target dims must be integer multiples of guide dims");
    if (nearest_weight < 0.0 || nearest_weight > 1.0)
        throw std::invalid_argument("upsample_guides: nearest_weight must lie in [0, 1]");
    const int sx = target_roots.width / guides.width;
    const int sy = target_roots.height / guides.height;

    // Root-local guide geometry.
    int length = 0;
    std::vector<std::vector<Eigen::Vector3d>> local(guides.texels());
    for (int t = 0; t < guides.texels(); ++t) {
        if (!guides.active[t]) continue;
        const Strand& s = guides.strands[t];
        if (length == 0) length = s.size();
        if (s.size() != length)
            throw std::invalid_argument("upsample_guides: guides have mixed point counts");
        local[t].resize(length);
        const Eigen::Matrix3d& frame = guide_roots.frames[t];
        const Eigen::Vector3d& root = guide_roots.positions[t];
        for (int j = 0; j < length; ++j)
            local[t][j] = frame.transpose() * (s.points[j] - root);
    }

    HairMap out;
    out.width = target_roots.width;
    out.height = target_roots.height;
    out.strands.resize(out.texels());
    out.active.assign(out.texels(), 0);
    for (int ty = 0; ty < out.height; ++ty)
        for (int tx = 0; tx < out.width; ++tx) {
            const TexelBlend blend = blend_for_target(guides, guides.width, guides.height,
                                                      tx, ty, sx, sy, nearest_weight);
            if (blend.nearest < 0 || !guides.active[blend.nearest]) continue;
            const int t = out.index(tx, ty);
            out.active[t] = 1;
            std::vector<Eigen::Vector3d> mixed(length, Eigen::Vector3d::Zero());
            for (const auto& src : blend.sources)
                for (int j = 0; j < length; ++j) mixed[j] += src.weight * local[src.texel][j];
            Strand& strand = out.strands[t];
            strand.points.resize(length);
            const Eigen::Matrix3d& frame = target_roots.frames[t];
            const Eigen::Vector3d& root = target_roots.positions[t];
            for (int j = 0; j < length; ++j) strand.points[j] = frame * mixed[j] + root;
        }
    return out;
}

std::vector<std::vector<Eigen::Vector3d>> upsample_guides_vjp(
    const std::vector<std::vector<Eigen::Vector3d>>& dense_grads, const HairMap& guides,
    const RootGrid& guide_roots, const RootGrid& target_roots, double nearest_weight) {
    if (static_cast<int>(dense_grads.size()) !=
        target_roots.width * target_roots.height)
        throw std::invalid_argument("upsample_guides_vjp: gradient grid size mismatch");
    const int sx = target_roots.width / guides.width;
    const int sy = target_roots.height / guides.height;

    int length = 0;
    for (const auto& g : dense_grads)
        if (!g.empty()) {
            length = static_cast<int>(g.size());
            break;
        }
    std::vector<std::vector<Eigen::Vector3d>> out(guides.texels());
    if (length == 0) return out;

    for (int ty = 0; ty < target_roots.height; ++ty)
        for (int tx = 0; tx < target_roots.width; ++tx) {
            const int t = ty * target_roots.width + tx;
            if (dense_grads[t].empty()) continue;
            const TexelBlend blend = blend_for_target(guides, guides.width, guides.height,
                                                      tx, ty, sx, sy, nearest_weight);
            if (blend.nearest < 0 || !guides.active[blend.nearest]) continue;
            // d(world_target)/d(world_guide) = F_target * w * F_guide^T
            const Eigen::Matrix3d& target_frame = target_roots.frames[t];
            for (const auto& src : blend.sources) {
                auto& acc = out[src.texel];
                if (acc.empty()) acc.assign(length, Eigen::Vector3d::Zero());
                const Eigen::Matrix3d chain =
                    guide_roots.frames[src.texel] * target_frame.transpose() * src.weight;
                for (int j = 0; j < length; ++j) acc[j] += chain * dense_grads[t][j];
            }
        }
    return out;
}

void save_hair_map(const std::string& path, const PcaHairMap& map) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_hair_map: cannot open " + path);
    out.write(kHairMapMagic, sizeof(kHairMapMagic));
    const std::uint32_t header[3] = {static_cast<std::uint32_t>(map.width),
                                     static_cast<std::uint32_t>(map.height),
                                     static_cast<std::uint32_t>(map.num_components())};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    std::vector<float> buf(static_cast<std::size_t>(map.texels()) * map.num_components());
    for (int t = 0; t < map.texels(); ++t)
        for (int c = 0; c < map.num_components(); ++c)
            buf[static_cast<std::size_t>(t) * map.num_components() + c] =
                static_cast<float>(map.coeffs(t, c));
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    std::vector<float> bald(map.baldness.begin(), map.baldness.end());
    out.write(reinterpret_cast<const char*>(bald.data()),
              static_cast<std::streamsize>(bald.size() * sizeof(float)));
    if (!out) throw std::runtime_error("save_hair_map: write failed for " + path);
}

PcaHairMap load_hair_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_hair_map: cannot open " + path);
    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kHairMapMagic, sizeof(magic)) != 0)
        throw std::runtime_error("load_hair_map: bad magic in " + path);
    std::uint32_t header[3];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in) throw std::runtime_error("load_hair_map: truncated header in " + path);
    PcaHairMap map(static_cast<int>(header[0]), static_cast<int>(header[1]),
                   static_cast<int>(header[2]));
    std::vector<float> buf(static_cast<std::size_t>(map.texels()) * map.num_components());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    for (int t = 0; t < map.texels(); ++t)
        for (int c = 0; c < map.num_components(); ++c)
            map.coeffs(t, c) = buf[static_cast<std::size_t>(t) * map.num_components() + c];
    std::vector<float> bald(static_cast<std::size_t>(map.texels()));
    in.read(reinterpret_cast<char*>(bald.data()),
            static_cast<std::streamsize>(bald.size() * sizeof(float)));
    if (!in) throw std::runtime_error("load_hair_map: truncated file " + path);
    map.baldness.assign(bald.begin(), bald.end());
    return map;
}

void save_strands_text(const std::string& path, const std::vector<Strand>& strands) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_strands_text: cannot open " + path);
    out.precision(17);
    out << strands.size() << "\n";
    for (const auto& s : strands) {
        out << s.size() << "\n";
        for (const auto& p : s.points)
            out << p.x() << " " << p.y() << " " << p.z() << "\n";
    }
    if (!out) throw std::runtime_error("save_strands_text: write failed for " + path);
}

std::vector<Strand> load_strands_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_strands_text: cannot open " + path);
    std::size_t count = 0;
    in >> count;
    std::vector<Strand> strands(count);
    for (std::size_t i = 0; i < count; ++i) {
        int n = 0;
        in >> n;
        if (!in || n < 2) throw std::runtime_error("load_strands_text: bad record in " + path);
        strands[i].points.resize(n);
        for (int j = 0; j < n; ++j)
            in >> strands[i].points[j].x() >> strands[i].points[j].y() >>
                strands[i].points[j].z();
    }
    if (!in) throw std::runtime_error("load_strands_text: truncated file " + path);
    return strands;
}

std::vector<Strand> collect_active_strands(const HairMap& map) {
    std::vector<Strand> out;
    out.reserve(map.strands.size());
    for (int t = 0; t < map.texels(); ++t)
        if (map.active[t]) out.push_back(map.strands[t]);
    return out;
}

}  // namespace hairkit
