#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "agan/model.hpp"
#include "agan/scores.hpp"
#include "agan/skeleton.hpp"

namespace agan {

/// Sliding-window schedule. Each window owns the stride-length segment
/// centred in it; the first window additionally owns its head and the last
/// its tail, so owned spans partition [0, stream_len).
struct WindowPlan {
    int stream_len = 0;
    int window_len = 0;
    int stride = 0;

    struct Window {
        int offset = 0;
        int own_begin = 0;  // absolute frame range owned by this window
        int own_end = 0;
    };
    std::vector<Window> windows;
};

WindowPlan plan_windows(int stream_len, int window_len, int stride);

/// Stream-length scores assembled from the owned middle part of each
/// window's scores.
FrameScores stitch_scores(const std::vector<FrameScores>& per_window, const WindowPlan& plan);

/// Per-frame category decision: the argmax category when its score exceeds
/// the threshold (lowest index on exact ties), otherwise none.
struct FramePrediction {
    std::optional<int> category;
    double score = 0.0;
};

std::vector<FramePrediction> assign_categories(const FrameScores& scores, double threshold);

/// Per-category leaky accumulator parameters. Derived from the minimum
/// action duration: threshold = round(0.5 * min_duration), upper = threshold + 10.
struct AccumulatorParams {
    double increment = 1.0;
    double decrement = 1.0;
    double lower_limit = 0.0;
    double upper_limit = 25.0;
    double trigger_threshold = 15.0;

    void validate() const;
};

AccumulatorParams derive_accumulator_params(int min_duration_frames);

struct TriggerEvent {
    int category = 0;
    int frame = 0;
};

struct AccumulatorTraceEntry {
    double score = 0.0;
    int trigger_state = 0;
};

/// Runs the per-category accumulator/trigger state machine over frame
/// predictions. Crossing the threshold (>=) from below emits one event and
/// latches until the score decays below the threshold.
struct AccumulateResult {
    std::vector<TriggerEvent> events;
    // state_trace[c][t]: accumulator value and trigger state after frame t.
    std::vector<std::vector<AccumulatorTraceEntry>> state_trace;
};

AccumulateResult accumulate(const std::vector<FramePrediction>& predictions,
                            const std::vector<AccumulatorParams>& params,
                            bool keep_trace = false);

/// Whole-stream inference: windows, per-window forward, middle-part
/// stitching. Streams shorter than one window yield empty scores.
FrameScores predict_stream_scores(const ParamStore& store, const AganetConfig& config,
                                  const SkeletonSequence& stream, int stride);

/// Online driver: frames are pushed one at a time; each completed window is
/// run through the model and its owned frames through assign/accumulate, so
/// events appear as soon as their owning window is complete. finish() flushes
/// the tail. The emitted event list is identical to the offline pipeline on
/// the same frames.
class StreamingEngine {
public:
    StreamingEngine(const ParamStore& store, AganetConfig config, int stride,
                    double assign_threshold, std::vector<AccumulatorParams> params);

    void push_frame(const SkeletonFrame& frame,
                    const std::function<void(const TriggerEvent&)>& on_event);
    void finish(const std::function<void(const TriggerEvent&)>& on_event);

    int frames_seen() const { return static_cast<int>(frames_.size()); }

private:
    void run_window(int offset, int own_begin, int own_end,
                    const std::function<void(const TriggerEvent&)>& on_event);

    const ParamStore& store_;
    AganetConfig config_;
    int stride_;
    double assign_threshold_;
    std::vector<AccumulatorParams> params_;
    std::vector<SkeletonFrame> frames_;
    std::vector<double> acc_scores_;
    std::vector<int> trigger_states_;
    int next_offset_ = 0;
    int emitted_upto_ = 0;
};

}  // namespace agan
