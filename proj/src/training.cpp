#include "agan/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>

namespace agan {

FrameLabels rasterize_labels(const std::vector<ActionAnnotation>& annotations, int num_frames,
                             int num_categories) {
    FrameLabels labels(num_frames, num_categories);
    for (const auto& ann : annotations) {
        const int lo = std::max(0, ann.start_frame);
        const int hi = std::min(num_frames, ann.end_frame);
        for (int t = lo; t < hi; ++t) {
            for (int c = 0; c < num_categories; ++c) labels.at(t, c) = 0;
            labels.at(t, ann.category) = 1;
        }
    }
    return labels;
}

std::vector<TrainSample> sample_subsequences(const SkeletonSequence& stream,
                                             const std::vector<ActionAnnotation>& annotations,
                                             int window_len, int stride, int num_categories) {
    const int L = stream.length();
    if (L < window_len) {
        std::cerr << "warning: stream of " << L << " frames is shorter than window "
                  << window_len << ", no samples taken\n";
        return {};
    }
    std::vector<TrainSample> samples;
    for (int offset = 0; offset + window_len <= L; offset += stride) {
        TrainSample s;
        s.skeleton.assign(stream.frames.begin() + offset,
                          stream.frames.begin() + offset + window_len);
        for (const auto& ann : annotations) {
            if (ann.end_frame > offset && ann.start_frame < offset + window_len) {
                s.annotations.push_back(
                    {ann.category, ann.start_frame - offset, ann.end_frame - offset});
            }
        }
        s.labels = rasterize_labels(s.annotations, window_len, num_categories);
        samples.push_back(std::move(s));
    }
    return samples;
}

namespace {

// Rodrigues rotation about a unit axis.
struct Rotation {
    double m[3][3];

    static Rotation axis_angle(const Vec3& axis, double angle_rad) {
        const double c = std::cos(angle_rad), s = std::sin(angle_rad), t = 1.0 - c;
        const double x = axis.x, y = axis.y, z = axis.z;
        Rotation r;
        r.m[0][0] = t * x * x + c;
        r.m[0][1] = t * x * y - s * z;
        r.m[0][2] = t * x * z + s * y;
        r.m[1][0] = t * x * y + s * z;
        r.m[1][1] = t * y * y + c;
        r.m[1][2] = t * y * z - s * x;
        r.m[2][0] = t * x * z - s * y;
        r.m[2][1] = t * y * z + s * x;
        r.m[2][2] = t * z * z + c;
        return r;
    }

    Vec3 apply(const Vec3& p) const {
        return {m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
                m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
                m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z};
    }
};

Vec3 random_unit_axis(Rng& rng) {
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

}  // namespace

TrainSample augment(const TrainSample& sample, const AugmentConfig& cfg, Rng& rng) {
    TrainSample out = sample;
    const int T = static_cast<int>(out.skeleton.size());

    if (cfg.rot) {
        const Vec3 axis = random_unit_axis(rng);
        const double angle = rng.uniform(0.0, cfg.rot_max_deg) * M_PI / 180.0;
        const Rotation rot = Rotation::axis_angle(axis, angle);
        for (auto& frame : out.skeleton)
            for (auto& joint : frame) joint = rot.apply(joint);
    }
    if (cfg.dist) {
        const double factor = rng.uniform(1.0 - cfg.dist_max_frac, 1.0 + cfg.dist_max_frac);
        for (auto& frame : out.skeleton)
            for (auto& joint : frame) {
                joint.x *= factor;
                joint.y *= factor;
                joint.z *= factor;
            }
    }
    if (cfg.gt && !out.annotations.empty()) {
        for (auto& ann : out.annotations) {
            const double max_shift = cfg.gt_max_frac * ann.length();
            const int ds = static_cast<int>(std::lround(rng.uniform(-1.0, 1.0) * max_shift));
            const int de = static_cast<int>(std::lround(rng.uniform(-1.0, 1.0) * max_shift));
            ann.start_frame += ds;
            ann.end_frame += de;
            if (ann.end_frame <= ann.start_frame) ann.end_frame = ann.start_frame + 1;
        }
        out.labels = rasterize_labels(out.annotations, T, out.labels.num_categories);
    }
    return out;
}

LossResult frame_ce_loss(const FrameScores& scores, const FrameLabels& labels) {
    if (scores.num_frames != labels.num_frames ||
        scores.num_categories != labels.num_categories) {
        throw ShapeError("loss shape mismatch: scores " + std::to_string(scores.num_frames) +
                         "x" + std::to_string(scores.num_categories) + " vs labels " +
                         std::to_string(labels.num_frames) + "x" +
                         std::to_string(labels.num_categories));
    }
    const int T = scores.num_frames, C = scores.num_categories;
    LossResult res;
    res.grad = FrameScores(T, C);
    double total = 0.0;
    for (int t = 0; t < T; ++t) {
        for (int c = 0; c < C; ++c) {
            const double s = scores.at(t, c);
            if (!(s > 0.0 && s < 1.0)) {
                throw NumericError("score outside (0,1) at frame " + std::to_string(t) +
                                   " category " + std::to_string(c) + ": " + std::to_string(s));
            }
            const double y = labels.at(t, c);
            total += -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
            res.grad.at(t, c) = (-y / s + (1.0 - y) / (1.0 - s)) / T;
        }
    }
    res.value = total / T;
    return res;
}

void adam_step(ParamStore& store, const Gradient& grads, const AdamConfig& cfg) {
    store.adam_step += 1;
    const double t = static_cast<double>(store.adam_step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (auto& [name, p] : store.params) {
        const Tensor& g = grads.at(name);
        if (!p.same_shape(g)) {
            throw ShapeError("gradient shape mismatch for " + name + ": " + shape_str(g.shape) +
                             " vs " + shape_str(p.shape));
        }
        Tensor& m = store.moment1[name];
        Tensor& v = store.moment2[name];
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const double gi = g.data[i];
            if (!std::isfinite(gi)) {
                throw NumericError("non-finite gradient in " + name + " at index " +
                                   std::to_string(i));
            }
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

namespace {

void accumulate(Gradient& acc, const Gradient& g) {
    if (acc.by_name.empty()) {
        acc = g;
        return;
    }
    for (auto& [name, t] : acc.by_name) {
        const Tensor& s = g.at(name);
        for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] += s.data[i];
    }
}

}  // namespace

std::vector<EpochLog> train(ParamStore& store, const AganetConfig& model_config,
                            const std::vector<TrainSample>& dataset, const TrainConfig& config) {
    if (dataset.empty()) throw DataError("training dataset is empty");
    model_config.validate();

    std::vector<EpochLog> logs;
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle_rng(hash_combine(config.seed, static_cast<std::uint64_t>(epoch),
                                     0x73687566ULL));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t batch_end =
                std::min(order.size(), pos + static_cast<std::size_t>(config.batch_size));
            Gradient batch_grad;
            double batch_loss = 0.0;
            const double inv_batch = 1.0 / static_cast<double>(batch_end - pos);
            for (std::size_t b = pos; b < batch_end; ++b) {
                const std::size_t idx = order[b];
                Rng sample_rng(hash_combine(config.seed, static_cast<std::uint64_t>(epoch),
                                            static_cast<std::uint64_t>(idx)));
                TrainSample aug = augment(dataset[idx], config.augment, sample_rng);
                Tensor input = skeleton_to_tensor(aug.skeleton, model_config.normalize_input);
                ForwardTrace trace = forward(store, model_config, input);
                LossResult loss = frame_ce_loss(trace.scores, aug.labels);
                if (!std::isfinite(loss.value)) {
                    throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
                }
                batch_loss += loss.value;
                for (double& gv : loss.grad.values) gv *= inv_batch;
                accumulate(batch_grad, backward(store, model_config, trace, loss.grad));
            }
            adam_step(store, batch_grad, config.adam);
            epoch_loss += batch_loss;
            pos = batch_end;
        }

        const auto t1 = std::chrono::steady_clock::now();
        EpochLog log;
        log.epoch = epoch;
        log.mean_loss = epoch_loss / static_cast<double>(dataset.size());
        log.seconds = std::chrono::duration<double>(t1 - t0).count();
        if (config.verbose) {
            std::cerr << "epoch " << epoch << " loss " << log.mean_loss << " (" << log.seconds
                      << "s)\n";
        }
        logs.push_back(log);
    }
    return logs;
}

}  // namespace agan
