#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "agan/errors.hpp"
#include "agan/synth.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace agan;

TEST_CASE("zero instances give a pure idle stream with no annotations") {
    SubjectProfile p = make_subject_profile(1, 0);
    Rng rng(1);
    GeneratedStream g = generate_stream(p, 0, rng);
    CHECK(g.annotations.empty());
    CHECK(g.sequence.length() > 0);
    for (const auto& frame : g.sequence.frames) {
        for (const auto& joint : frame) {
            CHECK(std::isfinite(joint.x));
            CHECK(std::isfinite(joint.y));
            CHECK(std::isfinite(joint.z));
        }
    }
}

TEST_CASE("ten instances cover each category once without overlap") {
    SubjectProfile p = make_subject_profile(5, 3);
    Rng rng(9);
    GeneratedStream g = generate_stream(p, 10, rng);
    REQUIRE(g.annotations.size() == 10);
    std::array<int, kNumCategories> seen{};
    for (const auto& ann : g.annotations) seen[static_cast<std::size_t>(ann.category)] += 1;
    for (int c = 0; c < kNumCategories; ++c) CHECK(seen[static_cast<std::size_t>(c)] == 1);
    for (std::size_t i = 0; i + 1 < g.annotations.size(); ++i) {
        CHECK(g.annotations[i].end_frame <= g.annotations[i + 1].start_frame);
    }
    CHECK(g.annotations.front().start_frame >= 0);
    CHECK(g.annotations.back().end_frame <= g.sequence.length());
}

TEST_CASE("generation is deterministic given the same profile and rng seed") {
    SubjectProfile p = make_subject_profile(11, 2);
    Rng rng_a(42), rng_b(42);
    GeneratedStream a = generate_stream(p, 6, rng_a);
    GeneratedStream b = generate_stream(p, 6, rng_b);
    REQUIRE(a.sequence.length() == b.sequence.length());
    for (int t = 0; t < a.sequence.length(); ++t) {
        for (int j = 0; j < kNumJoints; ++j) {
            CHECK(a.sequence.frames[static_cast<std::size_t>(t)][j].x ==
                  b.sequence.frames[static_cast<std::size_t>(t)][j].x);
        }
    }
    REQUIRE(a.annotations.size() == b.annotations.size());
}

TEST_CASE("during RL the left wrist rises above the head; in idle it never does") {
    for (int subject = 0; subject < 4; ++subject) {
        SubjectProfile p = make_subject_profile(17, subject);
        Rng rng(static_cast<std::uint64_t>(subject) + 100);
        GeneratedStream g = generate_stream(p, 10, rng);

        std::vector<bool> in_instance(static_cast<std::size_t>(g.sequence.length()), false);
        for (const auto& ann : g.annotations) {
            for (int t = ann.start_frame; t < ann.end_frame; ++t)
                in_instance[static_cast<std::size_t>(t)] = true;
        }
        for (int t = 0; t < g.sequence.length(); ++t) {
            if (!in_instance[static_cast<std::size_t>(t)]) {
                const auto& f = g.sequence.frames[static_cast<std::size_t>(t)];
                CHECK(f[LW].y < f[HD].y);
            }
        }
        for (const auto& ann : g.annotations) {
            if (ann.category != RL) continue;
            bool above = false;
            for (int t = ann.start_frame; t < ann.end_frame; ++t) {
                const auto& f = g.sequence.frames[static_cast<std::size_t>(t)];
                if (f[LW].y > f[HD].y) above = true;
            }
            CHECK(above);
        }
    }
}

TEST_CASE("stream CSV and annotation JSON round trips are lossless") {
    SubjectProfile p = make_subject_profile(23, 1);
    Rng rng(7);
    GeneratedStream g = generate_stream(p, 3, rng);
    const std::string csv = "roundtrip_stream.csv";
    const std::string ann = "roundtrip_ann.json";
    write_stream_csv(csv, g.sequence);
    SkeletonSequence back = read_stream_csv(csv);
    REQUIRE(back.length() == g.sequence.length());
    for (int t = 0; t < back.length(); ++t) {
        for (int j = 0; j < kNumJoints; ++j) {
            CHECK(back.frames[static_cast<std::size_t>(t)][j].x ==
                  g.sequence.frames[static_cast<std::size_t>(t)][j].x);
            CHECK(back.frames[static_cast<std::size_t>(t)][j].y ==
                  g.sequence.frames[static_cast<std::size_t>(t)][j].y);
            CHECK(back.frames[static_cast<std::size_t>(t)][j].z ==
                  g.sequence.frames[static_cast<std::size_t>(t)][j].z);
        }
    }

    write_annotations_json(ann, g.annotations);
    auto anns = read_annotations_json(ann);
    REQUIRE(anns.size() == g.annotations.size());
    for (std::size_t i = 0; i < anns.size(); ++i) {
        CHECK(anns[i].category == g.annotations[i].category);
        CHECK(anns[i].start_frame == g.annotations[i].start_frame);
        CHECK(anns[i].end_frame == g.annotations[i].end_frame);
    }

    write_annotations_json(ann, {});
    CHECK(read_annotations_json(ann).empty());

    std::remove(csv.c_str());
    std::remove(ann.c_str());
}

TEST_CASE("malformed and truncated files raise parse errors with line numbers") {
    const std::string path = "malformed_stream.csv";
    {
        std::ofstream os(path);
        os << "frame,HD_x\n";  // wrong column count on the data row below
        os << "0,1.0\n";
    }
    try {
        read_stream_csv(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
    {
        std::ofstream os(path);
        os << "not a header\n";
    }
    CHECK_THROWS_AS(read_stream_csv(path), DataError);
    {
        std::ofstream os(path);
        os << "frame,cols\n0,1.0,abc";
    }
    CHECK_THROWS_AS(read_stream_csv(path), DataError);
    std::remove(path.c_str());

    const std::string ann = "malformed_ann.json";
    {
        std::ofstream os(ann);
        os << "[{\"category\": \"RL\", \"start\": 5";  // truncated JSON
    }
    CHECK_THROWS_AS(read_annotations_json(ann), DataError);
    {
        std::ofstream os(ann);
        os << "[{\"category\": \"XX\", \"start\": 5, \"end\": 9}]";
    }
    CHECK_THROWS_AS(read_annotations_json(ann), DataError);
    std::remove(ann.c_str());
}

TEST_CASE("manifest round trip and split loading") {
    namespace fs = std::filesystem;
    const fs::path dir = "manifest_test_dir";
    fs::create_directories(dir);

    SubjectProfile p0 = make_subject_profile(31, 0);
    SubjectProfile p1 = make_subject_profile(31, 1);
    Rng r0(1), r1(2);
    GeneratedStream g0 = generate_stream(p0, 2, r0);
    GeneratedStream g1 = generate_stream(p1, 2, r1);
    write_stream_csv((dir / "s0.csv").string(), g0.sequence);
    write_annotations_json((dir / "s0.json").string(), g0.annotations);
    write_stream_csv((dir / "s1.csv").string(), g1.sequence);
    write_annotations_json((dir / "s1.json").string(), g1.annotations);

    DatasetManifest m;
    m.train_subjects = {0};
    m.test_subjects = {1};
    m.entries = {{0, "s0.csv", "s0.json"}, {1, "s1.csv", "s1.json"}};
    write_manifest((dir / "manifest.json").string(), m);
    DatasetManifest back = read_manifest((dir / "manifest.json").string());
    CHECK(back.train_subjects == m.train_subjects);
    CHECK(back.test_subjects == m.test_subjects);
    REQUIRE(back.entries.size() == 2);

    auto train = load_split((dir / "manifest.json").string(), "train");
    REQUIRE(train.size() == 1);
    CHECK(train[0].subject == 0);
    CHECK(train[0].sequence.length() == g0.sequence.length());
    auto all = load_split((dir / "manifest.json").string(), "all");
    CHECK(all.size() == 2);
    CHECK_THROWS_AS(load_split((dir / "manifest.json").string(), "bogus"), UsageError);

    fs::remove_all(dir);
}

namespace {

struct InstanceFeatures {
    std::array<double, 9> f{};
};

InstanceFeatures features_for(const SkeletonSequence& seq, const ActionAnnotation& ann) {
    InstanceFeatures out;
    double lw_max_y = -1e9, rw_max_y = -1e9;
    double lw_min_x = 1e9, lw_max_x = -1e9, rw_min_x = 1e9, rw_max_x = -1e9;
    double lw_min_z = 1e9, lw_max_z = -1e9, rw_min_z = 1e9, rw_max_z = -1e9;
    double min_wrist = 1e9;
    for (int t = ann.start_frame; t < ann.end_frame; ++t) {
        const auto& f = seq.frames[static_cast<std::size_t>(t)];
        const double lx = f[LW].x - f[NK].x, ly = f[LW].y - f[NK].y, lz = f[LW].z - f[NK].z;
        const double rx = f[RW].x - f[NK].x, ry = f[RW].y - f[NK].y, rz = f[RW].z - f[NK].z;
        lw_max_y = std::max(lw_max_y, ly);
        rw_max_y = std::max(rw_max_y, ry);
        lw_min_x = std::min(lw_min_x, lx);
        lw_max_x = std::max(lw_max_x, lx);
        rw_min_x = std::min(rw_min_x, rx);
        rw_max_x = std::max(rw_max_x, rx);
        lw_min_z = std::min(lw_min_z, lz);
        lw_max_z = std::max(lw_max_z, lz);
        rw_min_z = std::min(rw_min_z, rz);
        rw_max_z = std::max(rw_max_z, rz);
        const double wd = std::hypot(f[LW].x - f[RW].x, f[LW].y - f[RW].y, f[LW].z - f[RW].z);
        min_wrist = std::min(min_wrist, wd);
    }
    out.f = {lw_max_y, rw_max_y, lw_max_x - lw_min_x, rw_max_x - rw_min_x,
             lw_max_z - lw_min_z, rw_max_z - rw_min_z, lw_max_y - (-0.6), rw_max_y - (-0.6),
             min_wrist};
    return out;
}

}  // namespace

TEST_CASE("nearest-centroid on wrist statistics separates the categories") {
    std::vector<std::pair<int, InstanceFeatures>> data;
    for (int subject = 0; subject < 8; ++subject) {
        SubjectProfile p = make_subject_profile(41, subject);
        Rng rng(hash_combine(41, static_cast<std::uint64_t>(subject)));
        GeneratedStream g = generate_stream(p, 10, rng);
        for (const auto& ann : g.annotations) {
            data.emplace_back(ann.category, features_for(g.sequence, ann));
        }
    }
    REQUIRE(data.size() == 80);

    // z-score per feature
    constexpr int NF = 9;
    std::array<double, NF> mean{}, stddev{};
    for (const auto& [c, feat] : data) {
        for (int i = 0; i < NF; ++i) mean[static_cast<std::size_t>(i)] += feat.f[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < NF; ++i) mean[static_cast<std::size_t>(i)] /= static_cast<double>(data.size());
    for (const auto& [c, feat] : data) {
        for (int i = 0; i < NF; ++i) {
            const double d = feat.f[static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(i)];
            stddev[static_cast<std::size_t>(i)] += d * d;
        }
    }
    for (int i = 0; i < NF; ++i) {
        stddev[static_cast<std::size_t>(i)] =
            std::sqrt(stddev[static_cast<std::size_t>(i)] / static_cast<double>(data.size()));
        if (stddev[static_cast<std::size_t>(i)] < 1e-12) stddev[static_cast<std::size_t>(i)] = 1.0;
    }

    std::array<std::array<double, NF>, kNumCategories> centroid{};
    std::array<int, kNumCategories> count{};
    for (const auto& [c, feat] : data) {
        for (int i = 0; i < NF; ++i) {
            centroid[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] +=
                (feat.f[static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(i)]) /
                stddev[static_cast<std::size_t>(i)];
        }
        count[static_cast<std::size_t>(c)] += 1;
    }
    for (int c = 0; c < kNumCategories; ++c) {
        for (int i = 0; i < NF; ++i) {
            centroid[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] /=
                std::max(1, count[static_cast<std::size_t>(c)]);
        }
    }

    int correct = 0;
    for (const auto& [c, feat] : data) {
        int best = -1;
        double best_d = 1e18;
        for (int cand = 0; cand < kNumCategories; ++cand) {
            double d = 0.0;
            for (int i = 0; i < NF; ++i) {
                const double z =
                    (feat.f[static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(i)]) /
                    stddev[static_cast<std::size_t>(i)];
                const double diff = z - centroid[static_cast<std::size_t>(cand)][static_cast<std::size_t>(i)];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = cand;
            }
        }
        if (best == c) ++correct;
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    std::printf("nearest-centroid accuracy: %.3f\n", accuracy);
    CHECK(accuracy > 0.8);
}
