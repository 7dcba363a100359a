#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "agan/model.hpp"

#include <chrono>
#include <cstdio>

#include "agan/training.hpp"
#include "oracles.hpp"

using namespace agan;

namespace {

AganetConfig small_config(int window_len = 20) {
    AganetConfig cfg;
    cfg.window_len = window_len;
    return cfg;
}

FrameLabels random_labels(int t, int c, Rng& rng) {
    FrameLabels labels(t, c);
    for (int i = 0; i < t; ++i) {
        if (rng.uniform() < 0.6) {
            labels.at(i, static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(c)))) = 1;
        }
    }
    return labels;
}

}  // namespace

TEST_CASE("default configuration lands within 10% of the 111K parameter budget") {
    AganetConfig cfg;
    ParamStore store = build(cfg, 1);
    const std::int64_t n = count_parameters(store);
    std::printf("default parameter count: %lld\n", static_cast<long long>(n));
    CHECK(n >= 99900);
    CHECK(n <= 122100);
}

TEST_CASE("build is deterministic and attention-off wiring is strictly smaller") {
    AganetConfig cfg;
    ParamStore a = build(cfg, 42);
    ParamStore b = build(cfg, 42);
    REQUIRE(a.params.size() == b.params.size());
    for (const auto& [name, t] : a.params) {
        CHECK(t.data == b.params.at(name).data);
    }
    ParamStore c = build(cfg, 43);
    bool any_diff = false;
    for (const auto& [name, t] : a.params) {
        if (t.data != c.params.at(name).data) any_diff = true;
    }
    CHECK(any_diff);

    AganetConfig base = cfg;
    base.enable_lsta = false;
    base.enable_gsa = false;
    CHECK(count_parameters(build(base, 42)) < count_parameters(a));
}

TEST_CASE("build rejects window lengths not divisible by four") {
    AganetConfig cfg;
    cfg.window_len = 30;
    CHECK_THROWS_AS(build(cfg, 1), ShapeError);
}

TEST_CASE("forward maps a (3,100,10) window to 100x10 scores in (0,1)") {
    AganetConfig cfg;
    ParamStore store = build(cfg, 7);
    Rng rng(3);
    Tensor input = oracle::random_tensor({3, 100, 10}, rng, 0.3);
    ForwardTrace tr = forward(store, cfg, input);
    CHECK(tr.scores.num_frames == 100);
    CHECK(tr.scores.num_categories == 10);
    for (double v : tr.scores.values) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    Tensor zeros({3, 100, 10});
    ForwardTrace tz = forward(store, cfg, zeros);
    for (double v : tz.scores.values) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("forward rejects mismatched input shapes") {
    AganetConfig cfg = small_config();
    ParamStore store = build(cfg, 1);
    CHECK_THROWS_AS(forward(store, cfg, Tensor({3, 24, 10})), ShapeError);
    CHECK_THROWS_AS(forward(store, cfg, Tensor({2, 20, 10})), ShapeError);
}

TEST_CASE("lsta mask stays in (0,1) and zero mask reproduces the no-LSTA wiring") {
    AganetConfig with = small_config();
    with.enable_gsa = false;
    ParamStore store = build(with, 11);

    Rng rng(5);
    Tensor input = oracle::random_tensor({3, 20, 10}, rng, 0.5);
    ForwardTrace tr = forward(store, with, input);
    for (double v : tr.lsta_mask.data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    AganetConfig without = with;
    without.enable_lsta = false;
    ParamStore trunk = build(without, 999);
    for (auto& [name, t] : trunk.params) t = store.param(name);  // share trunk weights

    ForwardOptions opts;
    opts.force_lsta_mask_zero = true;
    ForwardTrace masked = forward(store, with, input, opts);
    ForwardTrace plain = forward(trunk, without, input);
    REQUIRE(masked.scores.values.size() == plain.scores.values.size());
    for (std::size_t i = 0; i < masked.scores.values.size(); ++i) {
        CHECK(masked.scores.values[i] == doctest::Approx(plain.scores.values[i]).epsilon(1e-12));
    }
}

TEST_CASE("zero GSA weights reproduce the GSA-disabled wiring") {
    AganetConfig with = small_config();
    ParamStore store = build(with, 13);

    AganetConfig without = with;
    without.enable_gsa = false;
    ParamStore trunk = build(without, 999);
    for (auto& [name, t] : trunk.params) t = store.param(name);

    Rng rng(6);
    Tensor input = oracle::random_tensor({3, 20, 10}, rng, 0.5);
    ForwardOptions opts;
    opts.force_gsa_weights_zero = true;
    ForwardTrace zeroed = forward(store, with, input, opts);
    ForwardTrace plain = forward(trunk, without, input);
    for (std::size_t i = 0; i < zeroed.scores.values.size(); ++i) {
        CHECK(zeroed.scores.values[i] == doctest::Approx(plain.scores.values[i]).epsilon(1e-12));
    }

    // Constant high-level features make max and avg pooling agree.
    ForwardTrace tr = forward(store, with, Tensor({3, 20, 10}));
    const Tensor& pooled = tr.gsa_pooled;  // first half max, second half avg
    const int half = pooled.dim(0) / 2;
    for (int c = 0; c < half; ++c) {
        for (int w = 0; w < pooled.dim(2); ++w) {
            CHECK(pooled.at(c, 0, w) == doctest::Approx(pooled.at(c + half, 0, w)).epsilon(1e-12));
        }
    }
}

TEST_CASE("gsa weights lie in (0,1) and the mask branch receives gradient") {
    AganetConfig cfg = small_config();
    ParamStore store = build(cfg, 17);
    Rng rng(8);
    Tensor input = oracle::random_tensor({3, 20, 10}, rng, 0.5);
    ForwardTrace tr = forward(store, cfg, input);
    REQUIRE(tr.gsa_weights.size() == cfg.channels.sd2);
    for (double v : tr.gsa_weights.data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    FrameLabels labels = random_labels(20, 10, rng);
    LossResult loss = frame_ce_loss(tr.scores, labels);
    Gradient g = backward(store, cfg, tr, loss.grad);
    double norm = 0.0;
    for (double v : g.at("gsa1.w").data) norm += v * v;
    for (double v : g.at("gsa2.w").data) norm += v * v;
    for (double v : g.at("gsa_proj.w").data) norm += v * v;
    CHECK(norm > 0.0);
}

TEST_CASE("end-to-end gradients match finite differences on a T=20 window") {
    AganetConfig cfg = small_config();
    ParamStore store = build(cfg, 23);
    Rng rng(9);
    Tensor input = oracle::random_tensor({3, 20, 10}, rng, 0.5);
    FrameLabels labels = random_labels(20, 10, rng);

    auto eval = [&]() {
        ForwardTrace tr = forward(store, cfg, input);
        return frame_ce_loss(tr.scores, labels).value;
    };
    ForwardTrace tr = forward(store, cfg, input);
    LossResult loss = frame_ce_loss(tr.scores, labels);
    Gradient g = backward(store, cfg, tr, loss.grad);

    for (auto& [name, p] : store.params) {
        const double worst =
            oracle::check_gradient(p.data, g.at(name).data, eval, rng, /*max_checks=*/20);
        INFO("parameter ", name);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("a frame change only affects scores inside the stack's receptive field") {
    AganetConfig cfg;
    cfg.window_len = 64;
    cfg.enable_gsa = false;  // GSA pools over all frames, so locality only
                             // holds for the attention-off temporal path
    ParamStore store = build(cfg, 31);
    Rng rng(12);
    Tensor input = oracle::random_tensor({3, 64, 10}, rng, 0.5);

    // Affected-interval propagation from the conv stack geometry.
    struct Interval {
        int lo, hi;
    };
    auto ceil_div = [](int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); };
    auto floor_div = [](int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
    auto through_conv = [&](Interval iv, const ConvSpec& s, int in_t) {
        const int out_t = s.out_h(in_t);
        Interval o;
        o.lo = std::max(0, ceil_div(iv.lo - s.kernel_h + 1 + s.pad_h, s.stride_h));
        o.hi = std::min(out_t - 1, floor_div(iv.hi + s.pad_h, s.stride_h));
        return o;
    };
    auto spec_of = [&](const std::string& name) {
        for (const auto& l : conv_layers(cfg)) {
            if (l.name == name) return l.spec;
        }
        throw DataError("no layer " + name);
    };

    const int t_changed = 37;
    Interval iv{t_changed, t_changed};
    iv = through_conv(iv, spec_of("sd1"), 64);
    iv = through_conv(iv, spec_of("lsta"), 64);  // mask path dominates the trunk path
    iv = through_conv(iv, spec_of("sd2"), 64);
    Interval low_iv = iv;
    iv = through_conv(iv, spec_of("td1"), 64);
    iv = through_conv(iv, spec_of("td2"), 32);
    iv = through_conv(iv, spec_of("td3"), 16);
    iv = through_conv(iv, spec_of("td4"), 16);
    Interval high_iv{iv.lo * 4, iv.hi * 4 + 3};
    Interval affected{std::min(low_iv.lo, high_iv.lo), std::max(low_iv.hi, high_iv.hi)};

    ForwardTrace before = forward(store, cfg, input);
    Tensor changed = input;
    for (int ch = 0; ch < 3; ++ch)
        for (int k = 0; k < 10; ++k) changed.at(ch, t_changed, k) += rng.normal(0.0, 0.5);
    ForwardTrace after = forward(store, cfg, changed);

    bool any_inside_diff = false;
    for (int t = 0; t < 64; ++t) {
        for (int c = 0; c < 10; ++c) {
            if (t < affected.lo || t > affected.hi) {
                CHECK(before.scores.at(t, c) == after.scores.at(t, c));  // bit-identical
            } else if (before.scores.at(t, c) != after.scores.at(t, c)) {
                any_inside_diff = true;
            }
        }
    }
    CHECK(any_inside_diff);
}

TEST_CASE("skeleton_to_tensor subtracts the mean neck position when normalizing") {
    std::vector<SkeletonFrame> frames(4);
    for (int t = 0; t < 4; ++t) {
        for (int j = 0; j < kNumJoints; ++j) {
            frames[static_cast<std::size_t>(t)][j] = {1.0 + j, 2.0 + t, 3.0};
        }
    }
    Tensor norm = skeleton_to_tensor(frames, true);
    // Neck (joint 1) mean: x=2, y=3.5, z=3.
    CHECK(norm.at(0, 0, NK) == doctest::Approx(0.0));
    CHECK(norm.at(1, 0, NK) == doctest::Approx(-1.5));
    CHECK(norm.at(2, 0, NK) == doctest::Approx(0.0));
    Tensor raw = skeleton_to_tensor(frames, false);
    CHECK(raw.at(0, 0, NK) == doctest::Approx(2.0));
}

TEST_CASE("weights survive a save/load round trip bit-for-bit") {
    AganetConfig cfg = small_config();
    cfg.enable_gsa = false;
    ParamStore store = build(cfg, 77);
    store.adam_step = 12345;
    const std::string path = "test_weights_roundtrip.agan";
    save_weights(path, cfg, store);
    LoadedWeights lw = load_weights(path);
    CHECK(lw.config.window_len == cfg.window_len);
    CHECK(lw.config.enable_gsa == cfg.enable_gsa);
    CHECK(lw.store.adam_step == 12345);
    REQUIRE(lw.store.params.size() == store.params.size());
    for (const auto& [name, t] : store.params) {
        CHECK(lw.store.params.at(name).data == t.data);
    }
    for (const auto& [name, t] : store.moment1) {
        CHECK(lw.store.moment1.at(name).data == t.data);
    }
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_weights("does_not_exist.agan"), DataError);
}

TEST_CASE("truncated weight files are rejected, not crashed on") {
    AganetConfig cfg = small_config();
    ParamStore store = build(cfg, 5);
    const std::string path = "test_weights_truncated.agan";
    save_weights(path, cfg, store);
    // Truncate to the first 100 bytes.
    {
        std::FILE* f = std::fopen(path.c_str(), "rb");
        REQUIRE(f);
        char buf[100];
        const std::size_t n = std::fread(buf, 1, sizeof(buf), f);
        std::fclose(f);
        f = std::fopen(path.c_str(), "wb");
        REQUIRE(f);
        std::fwrite(buf, 1, n, f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_weights(path), DataError);
    std::remove(path.c_str());
}
