#pragma once

#include <cstdint>
#include <vector>

namespace agan {

/// Per-frame per-category scores, each in (0,1). Row-major T x C.
struct FrameScores {
    int num_frames = 0;
    int num_categories = 0;
    std::vector<double> values;

    FrameScores() = default;
    FrameScores(int t, int c) : num_frames(t), num_categories(c), values(static_cast<std::size_t>(t) * c, 0.0) {}

    double& at(int t, int c) { return values[static_cast<std::size_t>(t) * num_categories + c]; }
    double at(int t, int c) const { return values[static_cast<std::size_t>(t) * num_categories + c]; }
};

/// Dense frame-wise binary labels, row-major T x C, entries in {0,1}.
struct FrameLabels {
    int num_frames = 0;
    int num_categories = 0;
    std::vector<std::uint8_t> values;

    FrameLabels() = default;
    FrameLabels(int t, int c) : num_frames(t), num_categories(c), values(static_cast<std::size_t>(t) * c, 0) {}

    std::uint8_t& at(int t, int c) { return values[static_cast<std::size_t>(t) * num_categories + c]; }
    std::uint8_t at(int t, int c) const { return values[static_cast<std::size_t>(t) * num_categories + c]; }
};

}  // namespace agan
