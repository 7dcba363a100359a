#include "agan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "agan/training.hpp"

namespace agan {

using json = nlohmann::json;

MatchResult match_triggers(const std::vector<TriggerEvent>& events,
                           const std::vector<ActionAnnotation>& annotations,
                           double extend_frac) {
    // Stable orderings by time regardless of input order.
    std::vector<std::size_t> event_order(events.size());
    std::iota(event_order.begin(), event_order.end(), 0);
    std::stable_sort(event_order.begin(), event_order.end(), [&](std::size_t a, std::size_t b) {
        return events[a].frame < events[b].frame;
    });
    std::vector<std::size_t> ann_order(annotations.size());
    std::iota(ann_order.begin(), ann_order.end(), 0);
    std::stable_sort(ann_order.begin(), ann_order.end(), [&](std::size_t a, std::size_t b) {
        return annotations[a].start_frame < annotations[b].start_frame;
    });

    MatchResult res;
    std::vector<bool> taken(annotations.size(), false);
    for (std::size_t ei : event_order) {
        const TriggerEvent& ev = events[ei];
        bool matched = false;
        for (std::size_t ai : ann_order) {
            if (taken[ai]) continue;
            const ActionAnnotation& ann = annotations[ai];
            if (ann.category != ev.category) continue;
            const double extended_end = ann.end_frame + extend_frac * ann.length();
            if (ev.frame >= ann.start_frame && ev.frame < extended_end) {
                taken[ai] = true;
                res.matches.emplace_back(ei, ai);
                matched = true;
                break;
            }
        }
        if (matched) {
            res.true_positives += 1;
        } else {
            res.false_positives += 1;
        }
    }
    res.false_negatives = static_cast<int>(annotations.size()) - res.true_positives;
    return res;
}

std::vector<ScoredStream> score_dataset(const ParamStore& store, const AganetConfig& config,
                                        const std::vector<LoadedStream>& streams, int stride) {
    std::vector<ScoredStream> out;
    out.reserve(streams.size());
    for (const auto& s : streams) {
        ScoredStream ss;
        ss.annotations = s.annotations;
        if (s.sequence.length() >= config.window_len) {
            ss.scores = predict_stream_scores(store, config, s.sequence, stride);
        }
        out.push_back(std::move(ss));
    }
    return out;
}

PRPoint trigger_pr(const std::vector<ScoredStream>& streams, double threshold,
                   const std::vector<AccumulatorParams>& params, double extend_frac) {
    if (streams.empty()) throw DataError("trigger_pr: empty dataset");
    int tp = 0, fp = 0, fn = 0;
    for (const auto& s : streams) {
        std::vector<TriggerEvent> events;
        if (s.scores.num_frames > 0) {
            const auto predictions = assign_categories(s.scores, threshold);
            events = accumulate(predictions, params).events;
        }
        const MatchResult m = match_triggers(events, s.annotations, extend_frac);
        tp += m.true_positives;
        fp += m.false_positives;
        fn += m.false_negatives;
    }
    PRPoint p;
    p.threshold = threshold;
    p.precision = (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp);
    p.recall = (tp + fn) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fn);
    return p;
}

std::vector<double> default_threshold_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
    return grid;
}

double ap_from_pr_points(const std::vector<PRPoint>& points) {
    if (points.empty()) return 0.0;
    std::vector<std::pair<double, double>> rp;  // (recall, precision)
    rp.reserve(points.size());
    for (const auto& p : points) rp.emplace_back(p.recall, p.precision);
    std::sort(rp.begin(), rp.end());
    // Monotone envelope: precision at recall r is the best precision among
    // operating points with recall >= r.
    for (std::size_t i = rp.size(); i-- > 1;) {
        rp[i - 1].second = std::max(rp[i - 1].second, rp[i].second);
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (const auto& [r, p] : rp) {
        ap += (r - prev_recall) * p;
        prev_recall = r;
    }
    return ap;
}

double ap_trig(const std::vector<ScoredStream>& streams, const std::vector<double>& thresholds,
               const std::vector<AccumulatorParams>& params, double extend_frac) {
    std::vector<PRPoint> points;
    points.reserve(thresholds.size());
    for (double th : thresholds) points.push_back(trigger_pr(streams, th, params, extend_frac));
    return ap_from_pr_points(points);
}

CapResult calibrated_ap(const std::vector<const FrameScores*>& scores,
                        const std::vector<const FrameLabels*>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw DataError("calibrated_ap: score/label stream counts differ or empty");
    }
    const int C = scores.front()->num_categories;
    CapResult res;
    res.per_category.assign(static_cast<std::size_t>(C), std::nullopt);

    for (int c = 0; c < C; ++c) {
        std::vector<std::pair<double, std::uint8_t>> frames;  // (score, label), frame order
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const FrameScores& s = *scores[i];
            const FrameLabels& l = *labels[i];
            if (s.num_frames != l.num_frames) {
                throw DataError("calibrated_ap: stream " + std::to_string(i) +
                                " score/label frame counts differ");
            }
            for (int t = 0; t < s.num_frames; ++t) frames.emplace_back(s.at(t, c), l.at(t, c));
        }
        std::int64_t pos = 0;
        for (const auto& f : frames) pos += f.second;
        if (pos == 0) {
            res.excluded.push_back(c);
            continue;
        }
        const std::int64_t neg = static_cast<std::int64_t>(frames.size()) - pos;
        const double w = static_cast<double>(neg) / static_cast<double>(pos);

        std::vector<std::size_t> order(frames.size());
        std::iota(order.begin(), order.end(), 0);
        // Descending score; ties keep ascending frame index.
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return frames[a].first > frames[b].first;
        });

        double tp = 0.0, fp = 0.0, sum = 0.0;
        for (std::size_t k : order) {
            if (frames[k].second) {
                tp += 1.0;
                sum += tp / (tp + fp / w);
            } else {
                fp += 1.0;
            }
        }
        res.per_category[static_cast<std::size_t>(c)] = sum / static_cast<double>(pos);
    }

    double total = 0.0;
    int included = 0;
    for (const auto& v : res.per_category) {
        if (v) {
            total += *v;
            ++included;
        }
    }
    res.mean = included > 0 ? total / included : 0.0;
    return res;
}

CapResult calibrated_ap(const std::vector<ScoredStream>& streams, int num_categories) {
    std::vector<const FrameScores*> scores;
    std::vector<FrameLabels> label_storage;
    label_storage.reserve(streams.size());
    for (const auto& s : streams) {
        if (s.scores.num_frames == 0) continue;
        label_storage.push_back(
            rasterize_labels(s.annotations, s.scores.num_frames, num_categories));
        scores.push_back(&s.scores);
    }
    if (scores.empty()) throw DataError("calibrated_ap: no scored streams");
    std::vector<const FrameLabels*> labels;
    labels.reserve(label_storage.size());
    for (const auto& l : label_storage) labels.push_back(&l);
    return calibrated_ap(scores, labels);
}

double pck(const std::vector<Pose2d>& predicted, const std::vector<Pose2d>& ground_truth,
           double alpha) {
    if (predicted.size() != ground_truth.size()) {
        throw DataError("pck: pose counts differ");
    }
    std::int64_t correct = 0, total = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const Pose2d& gt = ground_truth[i];
        const double hip_u = 0.5 * (gt[LH].u + gt[RH].u);
        const double hip_v = 0.5 * (gt[LH].v + gt[RH].v);
        const double torso = std::hypot(gt[NK].u - hip_u, gt[NK].v - hip_v);
        if (torso <= 0.0) {
            std::cerr << "warning: pck sample " << i << " has zero torso size, skipped\n";
            continue;
        }
        for (int j = 0; j < kNumJoints; ++j) {
            const double d = std::hypot(predicted[i][j].u - gt[j].u, predicted[i][j].v - gt[j].v);
            if (d <= alpha * torso) ++correct;
            ++total;
        }
    }
    if (total == 0) throw DataError("pck: no usable samples");
    return static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<std::vector<std::int64_t>> confusion_matrix(const std::vector<ScoredStream>& streams,
                                                        double threshold, int num_categories) {
    // rows: ground truth, cols: prediction; last index is "UD" (no action).
    std::vector<std::vector<std::int64_t>> m(
        static_cast<std::size_t>(num_categories + 1),
        std::vector<std::int64_t>(static_cast<std::size_t>(num_categories + 1), 0));
    for (const auto& s : streams) {
        if (s.scores.num_frames == 0) continue;
        const FrameLabels labels =
            rasterize_labels(s.annotations, s.scores.num_frames, num_categories);
        const auto predictions = assign_categories(s.scores, threshold);
        for (int t = 0; t < s.scores.num_frames; ++t) {
            int gt = num_categories;
            for (int c = 0; c < num_categories; ++c) {
                if (labels.at(t, c)) {
                    gt = c;
                    break;
                }
            }
            const int pred = predictions[static_cast<std::size_t>(t)].category.value_or(num_categories);
            m[static_cast<std::size_t>(gt)][static_cast<std::size_t>(pred)] += 1;
        }
    }
    return m;
}

json build_report(const std::vector<ScoredStream>& streams,
                  const std::vector<AccumulatorParams>& params, double threshold,
                  const std::vector<double>& threshold_grid, int num_categories) {
    const CapResult cap = calibrated_ap(streams, num_categories);
    const PRPoint headline = trigger_pr(streams, threshold, params);
    const double ap = ap_trig(streams, threshold_grid, params);

    json cap_per_category = json::object();
    for (int c = 0; c < num_categories; ++c) {
        const auto& v = cap.per_category[static_cast<std::size_t>(c)];
        cap_per_category[kCategoryNames[static_cast<std::size_t>(c)]] =
            v ? json(*v) : json(nullptr);
    }
    json excluded = json::array();
    for (int c : cap.excluded) excluded.push_back(kCategoryNames[static_cast<std::size_t>(c)]);

    std::vector<std::string> confusion_names;
    for (int c = 0; c < num_categories; ++c)
        confusion_names.push_back(kCategoryNames[static_cast<std::size_t>(c)]);
    confusion_names.push_back("UD");

    json report{
        {"format_version", kReportFormatVersion},
        {"cap_formula", "cPrec = TP / (TP + FP / w), w = negative/positive frame ratio per category"},
        {"cap", {{"per_category", cap_per_category}, {"mean", cap.mean}, {"excluded", excluded}}},
        {"ap_trig", ap},
        {"p_trig", headline.precision},
        {"r_trig", headline.recall},
        {"score_threshold", threshold},
        {"confusion", {{"labels", confusion_names},
                       {"matrix", confusion_matrix(streams, threshold, num_categories)}}},
    };
    return report;
}

void write_pr_csv(const std::string& path, const std::vector<PRPoint>& points) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << "threshold,precision,recall\n";
    for (const auto& p : points) {
        os << p.threshold << "," << p.precision << "," << p.recall << "\n";
    }
    if (!os) throw DataError("write failed: " + path);
}

}  // namespace agan
