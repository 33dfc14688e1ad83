// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hairkit/losses.hpp"
#include "hairkit/synth.hpp"

#include <string>

namespace hairkit {

struct AdamWConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-3;
};

/// Decoupled-weight-decay Adam state over a flat parameter vector.
struct AdamWState {
    AdamWConfig config;
    Eigen::VectorXd first_moment;
    Eigen::VectorXd second_moment;
    long step = 0;

    void init(Eigen::Index size) {
        first_moment = Eigen::VectorXd::Zero(size);
        second_moment = Eigen::VectorXd::Zero(size);
        step = 0;
    }
};

/// One bias-corrected update with decoupled weight decay. When `mask` is
/// non-null, entries with mask[i] == 0 are skipped entirely (no moment
/// update, no decay), which is what keeps frozen components bit-identical.
void adamw_step(AdamWState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                const std::vector<std::uint8_t>* mask = nullptr);

struct FitSchedule {
    int total_steps = 400;
    int coarse_steps = 20;
    int coarse_components = 10;
    LossWeights weights = LossWeights::inversion_stage();
    RenderConfig render;
    int upsample_width = 256;
    int upsample_height = 256;
    double nearest_weight = kDefaultNearestWeight;
    double bald_threshold = kDefaultBaldThreshold;
    bool sample_random_view = true;  // uniform per-step view choice (multi-view)
    unsigned seed = 0;
    AdamWConfig adamw;
    bool optimize_baldness = false;  // roots and mask stay fixed by default
};

struct FitStepRow {
    int step = 0;
    int view = 0;
    double seg = 0.0;
    double dirmap = 0.0;
    double depth = 0.0;
    double pen = 0.0;
    double total = 0.0;
};

struct EvalMetrics {
    double iou = 0.0;
    double undir = 0.0;
    double depth_l1 = 0.0;
};

struct FitReport {
    std::vector<FitStepRow> rows;
    EvalMetrics initial;
    EvalMetrics final;
    double wall_seconds = 0.0;
    bool aborted = false;
    std::string abort_reason;
};

struct FitView {
    CameraModel camera;
    TargetMaps targets;
};

/// Optimization-based inversion: decode -> upsample -> splat -> rasterize,
/// real-data loss plus the depth term, analytic backward through the whole
/// chain to the coefficient map, AdamW updates. For the first coarse_steps
/// only components [0, coarse_components) move. With several views each step
/// samples one uniformly (or cycles when sample_random_view is false).
/// Aborts with a report when the loss goes non-finite.
std::pair<PcaHairMap, FitReport> fit_hairmap(const PcaHairMap& init, const StrandBasis& basis,
                                             const RootGrid& roots, const HeadModel& head,
                                             const std::vector<FitView>& views,
                                             const FitSchedule& schedule);

/// IoU of the binarized silhouettes (threshold 0.5), the undirected
/// orientation metric over the silhouette intersection, and masked depth L1
/// (rendered depth min-max normalized over its own coverage first).
EvalMetrics eval_metrics(const RenderBuffers& render, const TargetMaps& target);

/// Renders a coefficient map through the fit pipeline (production
/// rasterizer) for evaluation or export.
RenderBuffers render_map(const PcaHairMap& map, const StrandBasis& basis, const HeadModel& head,
                         const CameraModel& cam, const FitSchedule& schedule);

/// Symmetric chamfer distance over `samples` points drawn from each strand
/// set (squared point distances, angle term 1 - |cos|); exact all-pairs for
/// small sample counts, grid-accelerated beyond.
struct ChamferResult {
    double points = 0.0;
    double angle = 0.0;
};
ChamferResult chamfer_eval(const std::vector<Strand>& pred, const std::vector<Strand>& gt,
                           int samples, unsigned seed = 0);

/// Per-step loss breakdown as a CSV table (step,view,seg,dirmap,depth,pen,total).
void save_report_csv(const std::string& path, const FitReport& report);

}  // namespace hairkit
