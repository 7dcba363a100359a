#pragma once

#include <cstdint>
#include <vector>

#include "agan/model.hpp"
#include "agan/rng.hpp"
#include "agan/scores.hpp"
#include "agan/skeleton.hpp"

namespace agan {

/// A fixed-length training window. Annotations are window-relative and keep
/// their full extent (boundaries may lie outside [0, T)) so that boundary
/// jitter is proportional to the whole instance length.
struct TrainSample {
    std::vector<SkeletonFrame> skeleton;
    std::vector<ActionAnnotation> annotations;
    FrameLabels labels;
};

struct AugmentConfig {
    bool rot = true;
    bool dist = true;
    bool gt = true;
    double rot_max_deg = 5.0;
    double dist_max_frac = 0.05;
    double gt_max_frac = 0.05;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Dense frame labels from window-relative annotations; overlaps are
/// resolved so that later instances in the list win.
FrameLabels rasterize_labels(const std::vector<ActionAnnotation>& annotations, int num_frames,
                             int num_categories);

/// Fixed-length windows at offsets 0, stride, 2*stride, ... with dense
/// labels. Streams shorter than window_len yield an empty list (warning on
/// stderr).
std::vector<TrainSample> sample_subsequences(const SkeletonSequence& stream,
                                             const std::vector<ActionAnnotation>& annotations,
                                             int window_len, int stride,
                                             int num_categories = kNumCategories);

/// rot / dist / gt augmentation with per-sample randomness.
TrainSample augment(const TrainSample& sample, const AugmentConfig& cfg, Rng& rng);

struct LossResult {
    double value = 0.0;
    FrameScores grad;  // dLoss / dScores, same T x C layout
};

/// Frame-wise binary cross entropy, averaged over frames and summed over
/// categories.
LossResult frame_ce_loss(const FrameScores& scores, const FrameLabels& labels);

/// One Adam update with bias correction. Rejects non-finite gradients.
void adam_step(ParamStore& store, const Gradient& grads, const AdamConfig& cfg);

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    double seconds = 0.0;
};

struct TrainConfig {
    int epochs = 60;
    int batch_size = 256;
    std::uint64_t seed = 0;
    AdamConfig adam;
    AugmentConfig augment;
    bool verbose = false;  // per-epoch progress on stderr
};

/// Minimizes the frame-wise CE loss over the dataset. Deterministic given
/// (store, dataset, config): shuffling and per-sample augmentation streams
/// are pure functions of (seed, epoch, sample index).
std::vector<EpochLog> train(ParamStore& store, const AganetConfig& model_config,
                            const std::vector<TrainSample>& dataset, const TrainConfig& config);

}  // namespace agan
