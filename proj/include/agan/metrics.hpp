#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "agan/engine.hpp"
#include "agan/scores.hpp"
#include "agan/skeleton.hpp"
#include "agan/synth.hpp"

namespace agan {

/// Outcome of matching trigger events against annotated instances.
struct MatchResult {
    int true_positives = 0;
    int false_positives = 0;
    int false_negatives = 0;
    std::vector<std::pair<std::size_t, std::size_t>> matches;  // (event idx, annotation idx)
};

/// Greedy one-to-one matching in trigger-time order. An event matches the
/// earliest unmatched same-category annotation whose window, extended by
/// extend_frac of its duration past the end, contains the trigger frame
/// (half-open).
MatchResult match_triggers(const std::vector<TriggerEvent>& events,
                           const std::vector<ActionAnnotation>& annotations,
                           double extend_frac = 0.2);

struct PRPoint {
    double threshold = 0.0;
    double precision = 1.0;
    double recall = 0.0;
};

/// Cached per-stream inference results for metric evaluation.
struct ScoredStream {
    FrameScores scores;
    std::vector<ActionAnnotation> annotations;
};

/// Runs inference over every stream long enough for one window; shorter
/// streams keep empty scores (their annotations still count as misses).
std::vector<ScoredStream> score_dataset(const ParamStore& store, const AganetConfig& config,
                                        const std::vector<LoadedStream>& streams, int stride);

/// assign -> accumulate -> match over all streams at one score threshold.
/// Precision is 1.0 when no events fire.
PRPoint trigger_pr(const std::vector<ScoredStream>& streams, double threshold,
                   const std::vector<AccumulatorParams>& params, double extend_frac = 0.2);

std::vector<double> default_threshold_grid();  // 0.05 .. 0.95 step 0.05

/// Area under the monotonized precision-recall envelope over the threshold
/// grid (precision interpolated as the running max from high recall down).
double ap_from_pr_points(const std::vector<PRPoint>& points);

double ap_trig(const std::vector<ScoredStream>& streams, const std::vector<double>& thresholds,
               const std::vector<AccumulatorParams>& params, double extend_frac = 0.2);

/// Calibrated average precision per category. Frames are ranked by score
/// descending (ties by frame order); calibrated precision at each positive
/// is TP/(TP + FP/w) with w = negatives/positives for that category.
/// Categories with no positive frame are excluded (nullopt).
struct CapResult {
    std::vector<std::optional<double>> per_category;
    double mean = 0.0;  // over included categories
    std::vector<int> excluded;
};

CapResult calibrated_ap(const std::vector<const FrameScores*>& scores,
                        const std::vector<const FrameLabels*>& labels);

/// Convenience overload deriving frame labels from annotations.
CapResult calibrated_ap(const std::vector<ScoredStream>& streams, int num_categories);

// --- pose metrics -----------------------------------------------------------

struct Point2 {
    double u = 0.0;
    double v = 0.0;
};

using Pose2d = std::array<Point2, kNumJoints>;

/// Fraction of predicted joints within alpha * torso size of ground truth,
/// torso size being the 2-d neck to hip-midpoint distance of the ground
/// truth pose. Samples with a degenerate reference scale are skipped with a
/// warning.
double pck(const std::vector<Pose2d>& predicted, const std::vector<Pose2d>& ground_truth,
           double alpha = 0.15);

// --- report -----------------------------------------------------------------

/// Frame-level confusion counts, rows = ground truth, cols = assigned
/// category; index num_categories is the undefined ("UD") row/column.
std::vector<std::vector<std::int64_t>> confusion_matrix(const std::vector<ScoredStream>& streams,
                                                        double threshold, int num_categories);

constexpr std::uint32_t kReportFormatVersion = 1;

/// The full evaluation report as JSON (schema in docs/report.schema.json).
nlohmann::json build_report(const std::vector<ScoredStream>& streams,
                            const std::vector<AccumulatorParams>& params, double threshold,
                            const std::vector<double>& threshold_grid, int num_categories);

void write_pr_csv(const std::string& path, const std::vector<PRPoint>& points);

}  // namespace agan
