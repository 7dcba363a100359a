#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "agan/training.hpp"

#include <cmath>

#include "oracles.hpp"

using namespace agan;

namespace {

SkeletonSequence constant_stream(int frames) {
    SkeletonSequence seq;
    seq.frames.assign(static_cast<std::size_t>(frames), SkeletonFrame{});
    for (auto& f : seq.frames) {
        for (int j = 0; j < kNumJoints; ++j) f[j] = {0.1 * j, 0.05 * j, 2.0};
    }
    return seq;
}

SkeletonSequence random_stream(int frames, Rng& rng) {
    SkeletonSequence seq;
    seq.frames.assign(static_cast<std::size_t>(frames), SkeletonFrame{});
    for (auto& f : seq.frames) {
        for (int j = 0; j < kNumJoints; ++j) {
            f[j] = {rng.normal(0.0, 0.3), rng.normal(0.0, 0.3), 2.0 + rng.normal(0.0, 0.2)};
        }
    }
    return seq;
}

// Scalar-loop reference for the frame-wise CE loss.
double naive_ce(const FrameScores& s, const FrameLabels& l) {
    double total = 0.0;
    for (int t = 0; t < s.num_frames; ++t) {
        for (int c = 0; c < s.num_categories; ++c) {
            if (l.at(t, c)) {
                total += -std::log(s.at(t, c));
            } else {
                total += -std::log(1.0 - s.at(t, c));
            }
        }
    }
    return total / s.num_frames;
}

}  // namespace

TEST_CASE("sample_subsequences window count and label placement") {
    SkeletonSequence stream = constant_stream(200);
    std::vector<ActionAnnotation> anns{{2, 30, 60}};
    auto samples = sample_subsequences(stream, anns, 100, 5);
    CHECK(samples.size() == 21);  // floor((200-100)/5)+1

    auto one = sample_subsequences(constant_stream(100), anns, 100, 5);
    REQUIRE(one.size() == 1);
    for (int t = 0; t < 100; ++t) {
        for (int c = 0; c < kNumCategories; ++c) {
            const bool want = (c == 2 && t >= 30 && t < 60);
            CHECK(one[0].labels.at(t, c) == (want ? 1 : 0));
        }
    }

    CHECK(sample_subsequences(constant_stream(50), anns, 100, 5).empty());
}

TEST_CASE("windows keep full extents of partially overlapping annotations") {
    SkeletonSequence stream = constant_stream(160);
    std::vector<ActionAnnotation> anns{{4, 90, 130}};
    auto samples = sample_subsequences(stream, anns, 100, 20);
    REQUIRE(samples.size() == 4);
    // Window at offset 20 sees [70,110) relative; full instance retained.
    REQUIRE(samples[1].annotations.size() == 1);
    CHECK(samples[1].annotations[0].start_frame == 70);
    CHECK(samples[1].annotations[0].end_frame == 110);
    for (int t = 0; t < 100; ++t) {
        CHECK(samples[1].labels.at(t, 4) == ((t >= 70) ? 1 : 0));
    }
}

TEST_CASE("augment with everything disabled is the identity") {
    Rng stream_rng(3);
    SkeletonSequence stream = random_stream(120, stream_rng);
    auto samples = sample_subsequences(stream, {{1, 10, 50}}, 100, 20);
    REQUIRE(!samples.empty());
    AugmentConfig cfg;
    cfg.rot = cfg.dist = cfg.gt = false;
    Rng rng(7);
    TrainSample out = augment(samples[0], cfg, rng);
    for (std::size_t t = 0; t < out.skeleton.size(); ++t) {
        for (int j = 0; j < kNumJoints; ++j) {
            CHECK(out.skeleton[t][j].x == samples[0].skeleton[t][j].x);
            CHECK(out.skeleton[t][j].y == samples[0].skeleton[t][j].y);
            CHECK(out.skeleton[t][j].z == samples[0].skeleton[t][j].z);
        }
    }
    CHECK(out.labels.values == samples[0].labels.values);
}

TEST_CASE("rot augmentation preserves all pairwise inter-joint distances") {
    Rng stream_rng(5);
    SkeletonSequence stream = random_stream(110, stream_rng);
    auto samples = sample_subsequences(stream, {}, 100, 20);
    AugmentConfig cfg;
    cfg.dist = cfg.gt = false;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        TrainSample out = augment(samples[0], cfg, rng);
        for (std::size_t t = 0; t < out.skeleton.size(); t += 17) {
            for (int a = 0; a < kNumJoints; ++a) {
                for (int b = a + 1; b < kNumJoints; ++b) {
                    auto dist = [](const SkeletonFrame& f, int i, int j) {
                        const double dx = f[i].x - f[j].x;
                        const double dy = f[i].y - f[j].y;
                        const double dz = f[i].z - f[j].z;
                        return std::sqrt(dx * dx + dy * dy + dz * dz);
                    };
                    CHECK(std::abs(dist(out.skeleton[t], a, b) -
                                   dist(samples[0].skeleton[t], a, b)) < 1e-9);
                }
            }
        }
    }
}

TEST_CASE("dist augmentation scales every origin distance by one factor") {
    Rng stream_rng(11);
    SkeletonSequence stream = random_stream(100, stream_rng);
    auto samples = sample_subsequences(stream, {}, 100, 20);
    AugmentConfig cfg;
    cfg.rot = cfg.gt = false;
    Rng rng(13);
    TrainSample out = augment(samples[0], cfg, rng);
    auto norm = [](const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); };
    const double f = norm(out.skeleton[0][0]) / norm(samples[0].skeleton[0][0]);
    CHECK(f >= 0.95);
    CHECK(f <= 1.05);
    for (std::size_t t = 0; t < out.skeleton.size(); t += 13) {
        for (int j = 0; j < kNumJoints; ++j) {
            const double got = norm(out.skeleton[t][j]);
            const double want = f * norm(samples[0].skeleton[t][j]);
            CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, want));
        }
    }
}

TEST_CASE("gt augmentation keeps categories and bounds boundary shifts") {
    SkeletonSequence stream = constant_stream(140);
    std::vector<ActionAnnotation> anns{{3, 20, 80}, {6, 95, 125}};
    auto samples = sample_subsequences(stream, anns, 100, 40);
    REQUIRE(!samples.empty());
    AugmentConfig cfg;
    cfg.rot = cfg.dist = false;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        TrainSample out = augment(samples[0], cfg, rng);
        REQUIRE(out.annotations.size() == samples[0].annotations.size());
        for (std::size_t i = 0; i < out.annotations.size(); ++i) {
            const auto& orig = samples[0].annotations[i];
            const auto& got = out.annotations[i];
            CHECK(got.category == orig.category);
            const int bound = static_cast<int>(std::ceil(0.05 * orig.length()));
            CHECK(std::abs(got.start_frame - orig.start_frame) <= bound);
            CHECK(std::abs(got.end_frame - orig.end_frame) <= bound);
        }
        // Labels must be the rasterization of the shifted annotations.
        FrameLabels expect = rasterize_labels(out.annotations, 100, kNumCategories);
        CHECK(out.labels.values == expect.values);
    }
}

TEST_CASE("frame CE loss: analytic values and scalar-loop oracle") {
    // s = 0.5 everywhere, T=1, C=1 -> ln 2.
    FrameScores half(1, 1);
    half.at(0, 0) = 0.5;
    FrameLabels one(1, 1);
    one.at(0, 0) = 1;
    LossResult r = frame_ce_loss(half, one);
    CHECK(r.value == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // scores == labels clamped -> loss ~ 0.
    FrameScores match(3, 2);
    FrameLabels labels(3, 2);
    for (int t = 0; t < 3; ++t) {
        labels.at(t, t % 2) = 1;
        for (int c = 0; c < 2; ++c) {
            match.at(t, c) = labels.at(t, c) ? 1.0 - 1e-9 : 1e-9;
        }
    }
    CHECK(frame_ce_loss(match, labels).value == doctest::Approx(0.0).epsilon(1e-6));

    // Random cases match the independent scalar loop within 1e-12.
    Rng rng(17);
    for (int iter = 0; iter < 50; ++iter) {
        FrameScores s(4, 3);
        FrameLabels l(4, 3);
        for (int t = 0; t < 4; ++t) {
            for (int c = 0; c < 3; ++c) {
                s.at(t, c) = rng.uniform(1e-4, 1.0 - 1e-4);
                l.at(t, c) = rng.uniform() < 0.5 ? 1 : 0;
            }
        }
        CHECK(frame_ce_loss(s, l).value == doctest::Approx(naive_ce(s, l)).epsilon(1e-12));
    }
}

TEST_CASE("frame CE loss gradient matches finite differences") {
    Rng rng(19);
    FrameScores s(5, 4);
    FrameLabels l(5, 4);
    for (int t = 0; t < 5; ++t) {
        for (int c = 0; c < 4; ++c) {
            s.at(t, c) = rng.uniform(0.05, 0.95);
            l.at(t, c) = rng.uniform() < 0.4 ? 1 : 0;
        }
    }
    LossResult r = frame_ce_loss(s, l);
    auto eval = [&]() { return frame_ce_loss(s, l).value; };
    CHECK(oracle::check_gradient(s.values, r.grad.values, eval, rng) < 1e-6);
}

TEST_CASE("frame CE loss rejects scores outside (0,1) and shape mismatches") {
    FrameScores s(1, 1);
    s.at(0, 0) = 1.0;
    FrameLabels l(1, 1);
    CHECK_THROWS_AS(frame_ce_loss(s, l), NumericError);
    FrameScores ok(1, 1);
    ok.at(0, 0) = 0.5;
    FrameLabels wrong(2, 1);
    CHECK_THROWS_AS(frame_ce_loss(ok, wrong), ShapeError);
}

TEST_CASE("adam: zero gradient leaves parameters, one step matches hand computation") {
    AganetConfig cfg;
    cfg.window_len = 20;
    ParamStore store;
    store.params["p"] = Tensor({1}, {0.0});
    store.moment1["p"] = Tensor({1});
    store.moment2["p"] = Tensor({1});

    Gradient zero;
    zero.by_name["p"] = Tensor({1}, {0.0});
    AdamConfig adam;
    adam_step(store, zero, adam);
    CHECK(store.adam_step == 1);
    CHECK(store.params["p"].data[0] == 0.0);

    // Fresh state, gradient 1: bias-corrected step is lr / (1 + eps).
    ParamStore s2;
    s2.params["p"] = Tensor({1}, {0.0});
    s2.moment1["p"] = Tensor({1});
    s2.moment2["p"] = Tensor({1});
    Gradient one;
    one.by_name["p"] = Tensor({1}, {1.0});
    adam_step(s2, one, adam);
    CHECK(s2.params["p"].data[0] ==
          doctest::Approx(-adam.lr / (1.0 + adam.eps)).epsilon(1e-12));

    // Determinism: identical calls from identical state give identical results.
    ParamStore s3;
    s3.params["p"] = Tensor({1}, {0.25});
    s3.moment1["p"] = Tensor({1}, {0.5});
    s3.moment2["p"] = Tensor({1}, {0.5});
    s3.adam_step = 3;
    ParamStore s4 = s3;
    Gradient g;
    g.by_name["p"] = Tensor({1}, {-0.7});
    adam_step(s3, g, adam);
    adam_step(s4, g, adam);
    CHECK(s3.params["p"].data == s4.params["p"].data);

    Gradient bad;
    bad.by_name["p"] = Tensor({1}, {1.0});
    bad.by_name["p"].data[0] = std::nan("");
    CHECK_THROWS_AS(adam_step(s3, bad, adam), NumericError);
}

TEST_CASE("one training epoch on one sample reduces the loss") {
    AganetConfig cfg;
    cfg.window_len = 20;
    ParamStore store = build(cfg, 3);

    Rng rng(23);
    SkeletonSequence stream = random_stream(20, rng);
    auto samples = sample_subsequences(stream, {{0, 5, 15}}, 20, 5);
    REQUIRE(samples.size() == 1);

    auto loss_now = [&]() {
        Tensor input = skeleton_to_tensor(samples[0].skeleton, cfg.normalize_input);
        return frame_ce_loss(forward(store, cfg, input).scores, samples[0].labels).value;
    };
    const double before = loss_now();
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 8;  // larger than the dataset: single batch, no crash
    tc.seed = 1;
    tc.augment.rot = tc.augment.dist = tc.augment.gt = false;
    train(store, cfg, samples, tc);
    CHECK(loss_now() < before);
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
    AganetConfig cfg;
    cfg.window_len = 20;
    Rng rng(29);
    SkeletonSequence stream = random_stream(60, rng);
    auto samples = sample_subsequences(stream, {{2, 10, 40}}, 20, 10);
    REQUIRE(samples.size() >= 2);

    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 2;
    tc.seed = 77;

    ParamStore a = build(cfg, 5);
    ParamStore b = build(cfg, 5);
    auto la = train(a, cfg, samples, tc);
    auto lb = train(b, cfg, samples, tc);
    REQUIRE(la.size() == lb.size());
    for (std::size_t e = 0; e < la.size(); ++e) CHECK(la[e].mean_loss == lb[e].mean_loss);
    for (const auto& [name, t] : a.params) {
        CHECK(t.data == b.params.at(name).data);  // bit-identical weights
    }

    CHECK_THROWS_AS(train(a, cfg, {}, tc), DataError);
}
