// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hairkit/losses.hpp"

#include <random>

namespace hairkit {

/// Procedural strand corpus: root-local damped sinusoids with a gravity-like
/// droop. The root-local z component is strictly increasing, so strands
/// placed on a convex head never penetrate it.
struct CorpusParams {
    int length = 200;            // points per strand
    double min_length = 0.12;    // scene units
    double max_length = 0.3;
    double wave_amp_min = 0.0;   // lateral wave amplitude, scene units
    double wave_amp_max = 0.02;
    double wave_freq_min = 0.5;  // cycles over the strand
    double wave_freq_max = 3.0;
    double droop_max = 1.1;      // max tilt from the root normal, radians (< pi/2)
};

std::vector<Strand> gen_strand_corpus(unsigned seed, int count, const CorpusParams& params);

/// Per-component standard deviation of the corpus coefficients under a basis.
Eigen::VectorXd coefficient_stddev(const std::vector<Strand>& corpus,
                                   const StrandBasis& basis);

struct SceneParams {
    int image_width = 64;
    int image_height = 64;
    double camera_distance_factor = 4.0;  // times max head radius
    double elevation_min = 0.15;          // radians above the horizon
    double elevation_max = 1.0;
    double coeff_clip_sigma = 2.0;        // clip sampled coefficients at 2 sigma
    int smooth_passes = 2;                // box blurs over the coefficient field
    int upsample_x = 2;                   // target/guide ratio used for supervision
    int upsample_y = 2;
    double nearest_weight = kDefaultNearestWeight;
    RenderConfig render;
    double framing = 0.38;  // subject half-extent as a fraction of image width
};

/// Self-contained inversion test scene: a random in-distribution coefficient
/// map (penetration-free by construction), a hemisphere camera, and target
/// maps rendered with the reference rasterizer through the same
/// decode/upsample pipeline the fit uses.
struct SynthScene {
    PcaHairMap ground_truth;
    CameraModel camera;
    TargetMaps targets;
    HeadModel head;
};

SynthScene gen_scene(unsigned seed, const HeadModel& head, int grid_width, int grid_height,
                     const StrandBasis& basis, const Eigen::VectorXd& coeff_stddev,
                     const SceneParams& params);

/// Renders target maps from a coefficient map exactly the way gen_scene
/// does (reference rasterizer, normalized depth).
TargetMaps render_targets(const PcaHairMap& map, const StrandBasis& basis,
                          const HeadModel& head, const CameraModel& cam,
                          const SceneParams& params);

/// Min-max normalization of a rendered depth buffer over its own coverage
/// (silhouette > 0.5); shared by target generation, the fit loop and eval.
struct DepthNormalization {
    double min = 0.0;
    double max = 0.0;
    bool valid = false;
    int argmin = -1;
    int argmax = -1;
};
DepthNormalization normalize_rendered_depth(const RenderBuffers& buffers,
                                            std::vector<double>& out_depth);

}  // namespace hairkit
