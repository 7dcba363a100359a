#include "agan/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace agan {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str(), path);
}

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
    KeyValueConfig kv;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw DataError(origin + ":" + std::to_string(line_no) +
                            ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw DataError(origin + ":" + std::to_string(line_no) + ": empty key");
        }
        kv.values_[key] = value;
    }
    return kv;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
}

int KeyValueConfig::get_int(const std::string& key, int dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    int v = 0;
    auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (res.ec != std::errc() || res.ptr != it->second.data() + it->second.size()) {
        throw DataError("config key '" + key + "': bad integer '" + it->second + "'");
    }
    return v;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    std::uint64_t v = 0;
    auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (res.ec != std::errc() || res.ptr != it->second.data() + it->second.size()) {
        throw DataError("config key '" + key + "': bad unsigned integer '" + it->second + "'");
    }
    return v;
}

double KeyValueConfig::get_double(const std::string& key, double dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    double v = 0.0;
    auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (res.ec != std::errc() || res.ptr != it->second.data() + it->second.size()) {
        throw DataError("config key '" + key + "': bad number '" + it->second + "'");
    }
    return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw DataError("config key '" + key + "': bad boolean '" + it->second + "'");
}

AganetConfig model_config_from(const KeyValueConfig& kv) {
    AganetConfig cfg;
    cfg.num_joints = kv.get_int("model.num_joints", cfg.num_joints);
    cfg.num_categories = kv.get_int("model.num_categories", cfg.num_categories);
    cfg.window_len = kv.get_int("model.window_len", cfg.window_len);
    cfg.channels.sd1 = kv.get_int("model.channels.sd1", cfg.channels.sd1);
    cfg.channels.sd2 = kv.get_int("model.channels.sd2", cfg.channels.sd2);
    for (int i = 0; i < 4; ++i) {
        cfg.channels.td[static_cast<std::size_t>(i)] =
            kv.get_int("model.channels.td" + std::to_string(i + 1),
                       cfg.channels.td[static_cast<std::size_t>(i)]);
    }
    cfg.channels.gsa_mid = kv.get_int("model.channels.gsa_mid", cfg.channels.gsa_mid);
    cfg.enable_lsta = kv.get_bool("model.enable_lsta", cfg.enable_lsta);
    cfg.enable_gsa = kv.get_bool("model.enable_gsa", cfg.enable_gsa);
    cfg.normalize_input = kv.get_bool("model.normalize_input", cfg.normalize_input);
    return cfg;
}

AugmentConfig augment_config_from(const KeyValueConfig& kv) {
    AugmentConfig cfg;
    cfg.rot = kv.get_bool("augment.rot", cfg.rot);
    cfg.dist = kv.get_bool("augment.dist", cfg.dist);
    cfg.gt = kv.get_bool("augment.gt", cfg.gt);
    cfg.rot_max_deg = kv.get_double("augment.rot_max_deg", cfg.rot_max_deg);
    cfg.dist_max_frac = kv.get_double("augment.dist_max_frac", cfg.dist_max_frac);
    cfg.gt_max_frac = kv.get_double("augment.gt_max_frac", cfg.gt_max_frac);
    if (cfg.rot_max_deg < 0.0 || cfg.dist_max_frac < 0.0 || cfg.gt_max_frac < 0.0) {
        throw DataError("augmentation bounds must be >= 0");
    }
    return cfg;
}

TrainConfig train_config_from(const KeyValueConfig& kv) {
    TrainConfig cfg;
    cfg.epochs = kv.get_int("train.epochs", cfg.epochs);
    cfg.batch_size = kv.get_int("train.batch", cfg.batch_size);
    cfg.seed = kv.get_u64("train.seed", cfg.seed);
    cfg.adam.lr = kv.get_double("train.lr", cfg.adam.lr);
    cfg.adam.beta1 = kv.get_double("train.beta1", cfg.adam.beta1);
    cfg.adam.beta2 = kv.get_double("train.beta2", cfg.adam.beta2);
    cfg.adam.eps = kv.get_double("train.eps", cfg.adam.eps);
    cfg.augment = augment_config_from(kv);
    if (cfg.epochs < 1 || cfg.batch_size < 1) {
        throw DataError("train.epochs and train.batch must be >= 1");
    }
    return cfg;
}

CameraIntrinsics intrinsics_from(const KeyValueConfig& kv) {
    CameraIntrinsics intr;
    intr.fx = kv.get_double("camera.fx", intr.fx);
    intr.fy = kv.get_double("camera.fy", intr.fy);
    intr.cx = kv.get_double("camera.cx", intr.cx);
    intr.cy = kv.get_double("camera.cy", intr.cy);
    intr.validate();
    return intr;
}

std::vector<AccumulatorParams> accumulator_params_from(const KeyValueConfig& kv,
                                                       int num_categories) {
    AccumulatorParams base;
    base.increment = kv.get_double("accumulator.increment", base.increment);
    base.decrement = kv.get_double("accumulator.decrement", base.decrement);
    base.lower_limit = kv.get_double("accumulator.lower_limit", base.lower_limit);
    base.trigger_threshold = kv.get_double("accumulator.trigger_threshold", base.trigger_threshold);
    base.upper_limit = kv.get_double("accumulator.upper_limit", base.upper_limit);

    std::vector<AccumulatorParams> params(static_cast<std::size_t>(num_categories), base);
    for (int c = 0; c < num_categories && c < kNumCategories; ++c) {
        const std::string& name = kCategoryNames[static_cast<std::size_t>(c)];
        AccumulatorParams& p = params[static_cast<std::size_t>(c)];
        p.increment = kv.get_double("accumulator.increment." + name, p.increment);
        p.decrement = kv.get_double("accumulator.decrement." + name, p.decrement);
        p.lower_limit = kv.get_double("accumulator.lower_limit." + name, p.lower_limit);
        p.trigger_threshold =
            kv.get_double("accumulator.trigger_threshold." + name, p.trigger_threshold);
        p.upper_limit = kv.get_double("accumulator.upper_limit." + name, p.upper_limit);
    }
    for (const auto& p : params) p.validate();
    return params;
}

}  // namespace agan
