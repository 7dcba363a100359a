#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "agan/scores.hpp"
#include "agan/skeleton.hpp"
#include "agan/tensor.hpp"

namespace agan {

/// Channel widths of the trunk and attention branches. Defaults land the
/// total trainable parameter count at 113,042.
struct ChannelPlan {
    int sd1 = 24;
    int sd2 = 40;
    std::array<int, 4> td{48, 64, 64, 64};
    int gsa_mid = 32;
};

struct AganetConfig {
    int num_joints = kNumJoints;
    int num_categories = kNumCategories;
    int window_len = 100;  // must be divisible by 4 (two 2x temporal downsamplings)
    ChannelPlan channels;
    bool enable_lsta = true;
    bool enable_gsa = true;
    bool normalize_input = true;  // subtract per-window mean neck position

    void validate() const;
};

/// Flat registry of named parameter tensors plus Adam moments.
struct ParamStore {
    std::map<std::string, Tensor> params;
    std::map<std::string, Tensor> moment1;
    std::map<std::string, Tensor> moment2;
    std::int64_t adam_step = 0;

    Tensor& param(const std::string& name);
    const Tensor& param(const std::string& name) const;
};

std::int64_t count_parameters(const ParamStore& store);

struct ConvLayerInfo {
    std::string name;
    ConvSpec spec;
};

/// The conv layers of the network in forward order for a given config
/// (attention branches included only when enabled).
std::vector<ConvLayerInfo> conv_layers(const AganetConfig& config);

/// Deterministic parameter initialization for the given seed.
ParamStore build(const AganetConfig& config, std::uint64_t seed);

struct ForwardOptions {
    // Test hooks: substitute a zero mask / zero weights to check the
    // residual-attention identity against the attention-off wiring.
    bool force_lsta_mask_zero = false;
    bool force_gsa_weights_zero = false;
};

/// Intermediate activations retained for the backward pass.
struct ForwardTrace {
    Tensor input;
    Tensor sd1_out;        // after relu
    Tensor lsta_mask;      // sigmoid output
    Tensor sd1_modulated;  // sd1_out * (1 + mask)
    Tensor low;            // SD stage output (after relu)
    Tensor td_out[4];      // after relu
    Tensor gsa_hidden[2];  // after relu
    Tensor gsa_pooled;     // concat(max,avg) over T
    Tensor gsa_squeezed;   // mean over joints
    Tensor gsa_weights;    // sigmoid output, one per low-level channel
    Tensor low_modulated;
    Tensor fused;          // concat(low_modulated, upsampled high)
    Tensor score_map;      // (C, T, 1) clamped sigmoid
    FrameScores scores;
};

/// Dense frame-wise category scores for a (3, T, K) skeleton image.
ForwardTrace forward(const ParamStore& store, const AganetConfig& config, const Tensor& input,
                     const ForwardOptions& opts = {});

/// Gradients of a scalar loss w.r.t. all parameters, given dLoss/dScores.
Gradient backward(const ParamStore& store, const AganetConfig& config, const ForwardTrace& trace,
                  const FrameScores& upstream);

/// Arranges a window of skeleton frames as a (3, T, K) image. When
/// normalize is set, the per-window mean neck position is subtracted.
Tensor skeleton_to_tensor(std::span<const SkeletonFrame> window, bool normalize);

// Versioned binary weight container ("AGAN"). Layout documented in
// docs/formats.md.
constexpr std::uint32_t kWeightsFormatVersion = 1;
void save_weights(const std::string& path, const AganetConfig& config, const ParamStore& store);
struct LoadedWeights {
    AganetConfig config;
    ParamStore store;
};
LoadedWeights load_weights(const std::string& path);

}  // namespace agan
