#include "agan/engine.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <span>

namespace agan {

WindowPlan plan_windows(int stream_len, int window_len, int stride) {
    if (window_len < 1 || stride < 1) throw DataError("window_len and stride must be >= 1");
    if (stride > window_len) {
        throw DataError("stride " + std::to_string(stride) + " exceeds window length " +
                        std::to_string(window_len));
    }
    if (stream_len < window_len) {
        throw DataError("stream of " + std::to_string(stream_len) +
                        " frames is shorter than one window (" + std::to_string(window_len) +
                        ")");
    }
    WindowPlan plan;
    plan.stream_len = stream_len;
    plan.window_len = window_len;
    plan.stride = stride;
    const int mid_start = (window_len - stride) / 2;
    const int last_regular = ((stream_len - window_len) / stride) * stride;
    for (int offset = 0; offset <= last_regular; offset += stride) {
        WindowPlan::Window w;
        w.offset = offset;
        w.own_begin = offset == 0 ? 0 : offset + mid_start;
        w.own_end = offset + mid_start + stride;
        plan.windows.push_back(w);
    }
    // The final window clamps to the stream end and owns the whole tail.
    if (last_regular < stream_len - window_len) {
        WindowPlan::Window w;
        w.offset = stream_len - window_len;
        w.own_begin = plan.windows.back().own_end;
        w.own_end = stream_len;
        plan.windows.push_back(w);
    } else {
        plan.windows.back().own_end = stream_len;
    }
    return plan;
}

FrameScores stitch_scores(const std::vector<FrameScores>& per_window, const WindowPlan& plan) {
    if (per_window.size() != plan.windows.size()) {
        throw DataError("stitch_scores: " + std::to_string(per_window.size()) +
                        " score blocks for " + std::to_string(plan.windows.size()) + " windows");
    }
    if (per_window.empty()) return {};
    const int C = per_window.front().num_categories;
    FrameScores out(plan.stream_len, C);
    for (std::size_t i = 0; i < plan.windows.size(); ++i) {
        const auto& w = plan.windows[i];
        const FrameScores& ws = per_window[i];
        if (ws.num_frames != plan.window_len || ws.num_categories != C) {
            throw DataError("stitch_scores: window " + std::to_string(i) +
                            " has unexpected score shape");
        }
        for (int t = w.own_begin; t < w.own_end; ++t) {
            for (int c = 0; c < C; ++c) out.at(t, c) = ws.at(t - w.offset, c);
        }
    }
    return out;
}

std::vector<FramePrediction> assign_categories(const FrameScores& scores, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw DataError("assignment threshold must lie in (0,1), got " +
                        std::to_string(threshold));
    }
    std::vector<FramePrediction> out(static_cast<std::size_t>(scores.num_frames));
    for (int t = 0; t < scores.num_frames; ++t) {
        int best = 0;
        double best_score = scores.at(t, 0);
        for (int c = 1; c < scores.num_categories; ++c) {
            if (scores.at(t, c) > best_score) {  // lowest index wins exact ties
                best_score = scores.at(t, c);
                best = c;
            }
        }
        if (best_score > threshold) {
            out[static_cast<std::size_t>(t)] = {best, best_score};
        }
    }
    return out;
}

void AccumulatorParams::validate() const {
    if (increment <= 0.0 || decrement <= 0.0) {
        throw DataError("accumulator increment/decrement must be positive");
    }
    if (!(lower_limit <= trigger_threshold && trigger_threshold <= upper_limit)) {
        throw DataError("accumulator limits must satisfy lower <= threshold <= upper");
    }
}

AccumulatorParams derive_accumulator_params(int min_duration_frames) {
    AccumulatorParams p;
    p.trigger_threshold = std::round(0.5 * min_duration_frames);
    p.upper_limit = p.trigger_threshold + 10.0;
    return p;
}

AccumulateResult accumulate(const std::vector<FramePrediction>& predictions,
                            const std::vector<AccumulatorParams>& params, bool keep_trace) {
    const int C = static_cast<int>(params.size());
    for (const auto& p : params) p.validate();

    AccumulateResult res;
    std::vector<double> score(static_cast<std::size_t>(C));
    std::vector<int> state(static_cast<std::size_t>(C), 0);
    for (int c = 0; c < C; ++c) score[static_cast<std::size_t>(c)] = params[static_cast<std::size_t>(c)].lower_limit;
    if (keep_trace) res.state_trace.assign(static_cast<std::size_t>(C), {});

    for (std::size_t t = 0; t < predictions.size(); ++t) {
        const auto& pred = predictions[t];
        for (int c = 0; c < C; ++c) {
            const auto& p = params[static_cast<std::size_t>(c)];
            double& s = score[static_cast<std::size_t>(c)];
            int& st = state[static_cast<std::size_t>(c)];
            if (pred.category && *pred.category == c) {
                s = std::min(p.upper_limit, s + p.increment);
            } else {
                s = std::max(p.lower_limit, s - p.decrement);
            }
            if (st == 0 && s >= p.trigger_threshold) {
                res.events.push_back({c, static_cast<int>(t)});
                st = 1;
            } else if (st == 1 && s < p.trigger_threshold) {
                st = 0;
            }
            if (keep_trace) {
                res.state_trace[static_cast<std::size_t>(c)].push_back({s, st});
            }
        }
    }
    return res;
}

FrameScores predict_stream_scores(const ParamStore& store, const AganetConfig& config,
                                  const SkeletonSequence& stream, int stride) {
    const int T = config.window_len;
    if (stream.length() < T) {
        std::cerr << "warning: stream of " << stream.length()
                  << " frames is shorter than one window (" << T << "), no scores produced\n";
        return {};
    }
    const WindowPlan plan = plan_windows(stream.length(), T, stride);
    std::vector<FrameScores> per_window;
    per_window.reserve(plan.windows.size());
    for (const auto& w : plan.windows) {
        const std::span<const SkeletonFrame> window(stream.frames.data() + w.offset,
                                                    static_cast<std::size_t>(T));
        const Tensor input = skeleton_to_tensor(window, config.normalize_input);
        per_window.push_back(forward(store, config, input).scores);
    }
    return stitch_scores(per_window, plan);
}

StreamingEngine::StreamingEngine(const ParamStore& store, AganetConfig config, int stride,
                                 double assign_threshold, std::vector<AccumulatorParams> params)
    : store_(store),
      config_(std::move(config)),
      stride_(stride),
      assign_threshold_(assign_threshold),
      params_(std::move(params)) {
    if (stride_ < 1 || stride_ > config_.window_len) {
        throw DataError("stream stride must lie in [1, window_len]");
    }
    for (const auto& p : params_) p.validate();
    acc_scores_.assign(params_.size(), 0.0);
    for (std::size_t c = 0; c < params_.size(); ++c) acc_scores_[c] = params_[c].lower_limit;
    trigger_states_.assign(params_.size(), 0);
}

void StreamingEngine::run_window(int offset, int own_begin, int own_end,
                                 const std::function<void(const TriggerEvent&)>& on_event) {
    const int T = config_.window_len;
    const std::span<const SkeletonFrame> window(frames_.data() + offset,
                                                static_cast<std::size_t>(T));
    const Tensor input = skeleton_to_tensor(window, config_.normalize_input);
    const FrameScores scores = forward(store_, config_, input).scores;

    // Feed owned frames through assign/accumulate in stream order.
    for (int t = own_begin; t < own_end; ++t) {
        int best = 0;
        double best_score = scores.at(t - offset, 0);
        for (int c = 1; c < scores.num_categories; ++c) {
            if (scores.at(t - offset, c) > best_score) {
                best_score = scores.at(t - offset, c);
                best = c;
            }
        }
        const bool predicted = best_score > assign_threshold_;
        for (std::size_t c = 0; c < params_.size(); ++c) {
            const auto& p = params_[c];
            double& s = acc_scores_[c];
            int& st = trigger_states_[c];
            if (predicted && static_cast<std::size_t>(best) == c) {
                s = std::min(p.upper_limit, s + p.increment);
            } else {
                s = std::max(p.lower_limit, s - p.decrement);
            }
            if (st == 0 && s >= p.trigger_threshold) {
                on_event({static_cast<int>(c), t});
                st = 1;
            } else if (st == 1 && s < p.trigger_threshold) {
                st = 0;
            }
        }
    }
    emitted_upto_ = own_end;
}

void StreamingEngine::push_frame(const SkeletonFrame& frame,
                                 const std::function<void(const TriggerEvent&)>& on_event) {
    frames_.push_back(frame);
    const int T = config_.window_len;
    const int mid_start = (T - stride_) / 2;
    // A window at next_offset_ completes once its last frame has arrived.
    while (next_offset_ + T <= static_cast<int>(frames_.size())) {
        const int offset = next_offset_;
        const int own_begin = offset == 0 ? 0 : offset + mid_start;
        const int own_end = offset + mid_start + stride_;
        run_window(offset, own_begin, own_end, on_event);
        next_offset_ += stride_;
    }
}

void StreamingEngine::finish(const std::function<void(const TriggerEvent&)>& on_event) {
    const int L = static_cast<int>(frames_.size());
    const int T = config_.window_len;
    if (L < T) {
        std::cerr << "warning: stream ended after " << L << " frames, shorter than one window ("
                  << T << "); no predictions made\n";
        return;
    }
    // Tail frames beyond the last interior middle are owned by a final
    // window clamped to the stream end, matching the offline plan.
    if (emitted_upto_ < L) {
        run_window(L - T, emitted_upto_, L, on_event);
    }
}

}  // namespace agan
