#pragma once

#include <map>
#include <optional>
#include <string>

#include "agan/engine.hpp"
#include "agan/geometry.hpp"
#include "agan/model.hpp"
#include "agan/training.hpp"

namespace agan {

/// Plain-text "key = value" configuration ('#' starts a comment). Key names
/// are dot-namespaced; see docs/formats.md for the schema.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig load(const std::string& path);
    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& dflt) const;
    int get_int(const std::string& key, int dflt) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t dflt) const;
    double get_double(const std::string& key, double dflt) const;
    bool get_bool(const std::string& key, bool dflt) const;

private:
    std::map<std::string, std::string> values_;
};

AganetConfig model_config_from(const KeyValueConfig& kv);
TrainConfig train_config_from(const KeyValueConfig& kv);
AugmentConfig augment_config_from(const KeyValueConfig& kv);
CameraIntrinsics intrinsics_from(const KeyValueConfig& kv);

/// Per-category accumulator parameters: global keys (accumulator.increment,
/// .decrement, .lower_limit, .trigger_threshold, .upper_limit) with optional
/// per-category overrides (accumulator.trigger_threshold.RL = 12).
std::vector<AccumulatorParams> accumulator_params_from(const KeyValueConfig& kv,
                                                       int num_categories);

}  // namespace agan
