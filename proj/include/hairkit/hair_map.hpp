// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hairkit/scalp.hpp"
#include "hairkit/strand_codec.hpp"

#include <string>
#include <vector>

namespace hairkit {

constexpr double kDefaultBaldThreshold = 0.5;
constexpr double kDefaultNearestWeight = 0.5;

/// Texture of per-texel PCA coefficients plus a baldness plane. Texel
/// (x, y) lives at row y * width + x; its UV center is ((x+.5)/W, (y+.5)/H).
struct PcaHairMap {
    int width = 0;
    int height = 0;
    Eigen::MatrixXd coeffs;        // (W*H) x num_components
    std::vector<double> baldness;  // W*H, in [0, 1]

    PcaHairMap() = default;
    PcaHairMap(int w, int h, int num_components)
        : width(w), height(h),
          coeffs(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(w) * h, num_components)),
          baldness(static_cast<std::size_t>(w) * h, 0.0) {}

    int num_components() const { return static_cast<int>(coeffs.cols()); }
    int texels() const { return width * height; }
    int index(int x, int y) const { return y * width + x; }
};

/// World-space strands on a texture grid. Inactive texels carry empty strands.
struct HairMap {
    int width = 0;
    int height = 0;
    std::vector<Strand> strands;
    std::vector<std::uint8_t> active;

    int texels() const { return width * height; }
    int index(int x, int y) const { return y * width + x; }
    int active_count() const;
};

/// Scalp root positions and frames sampled at texel centers.
struct RootGrid {
    int width = 0;
    int height = 0;
    std::vector<Eigen::Vector3d> positions;
    std::vector<Eigen::Matrix3d> frames;  // columns: tangent_u, tangent_v, normal

    int index(int x, int y) const { return y * width + x; }
    static RootGrid from_head(const HeadModel& head, int width, int height);
};

/// Decodes every texel with baldness >= threshold:
/// strand = frame * decode(gamma) + root.
HairMap decode_map(const PcaHairMap& pca, const StrandBasis& basis, const RootGrid& roots,
                   double bald_threshold = kDefaultBaldThreshold);

/// Adjoint of decode_map with respect to the coefficient map: accumulates
/// world-space per-point gradients into per-texel gamma gradients.
/// `point_grads[t]` must be empty (skipped) or length basis.length.
Eigen::MatrixXd decode_map_vjp(const std::vector<std::vector<Eigen::Vector3d>>& point_grads,
                               const PcaHairMap& pca, const StrandBasis& basis,
                               const RootGrid& roots,
                               double bald_threshold = kDefaultBaldThreshold);

/// Nearest projection of a strand dataset onto the texture grid. Each
/// occupied texel takes the strand whose root UV is closest to the texel
/// center (lowest index on ties) and baldness 1; empty texels stay bald.
PcaHairMap project_dataset(const std::vector<Strand>& strands,
                           const std::vector<Eigen::Vector2d>& root_uvs,
                           int width, int height, const StrandBasis& basis,
                           const HeadModel& head);

/// Guide upsampling: per new texel, a nearest/bilinear blend of the guides'
/// root-local point arrays, re-rooted to the new texel's scalp point. The
/// baldness/active plane is block-replicated from the nearest guide.
HairMap upsample_guides(const HairMap& guides, const RootGrid& guide_roots,
                        const RootGrid& target_roots,
                        double nearest_weight = kDefaultNearestWeight);

/// Adjoint of upsample_guides: scatters per-point world gradients on the
/// upsampled map back to per-point world gradients on the guide map.
std::vector<std::vector<Eigen::Vector3d>> upsample_guides_vjp(
    const std::vector<std::vector<Eigen::Vector3d>>& dense_grads, const HairMap& guides,
    const RootGrid& guide_roots, const RootGrid& target_roots,
    double nearest_weight = kDefaultNearestWeight);

// Hair map file ("HMAP1"): header {W, H, num_components}, then all texel
// coefficients, then the baldness plane, little-endian 32-bit floats.
void save_hair_map(const std::string& path, const PcaHairMap& map);
PcaHairMap load_hair_map(const std::string& path);

// Line-oriented strand export: strand count, then per strand the point
// count followed by one "x y z" line per point.
void save_strands_text(const std::string& path, const std::vector<Strand>& strands);
std::vector<Strand> load_strands_text(const std::string& path);

/// Active strands of a hair map in texel order.
std::vector<Strand> collect_active_strands(const HairMap& map);

}  // namespace hairkit
