#include "agan/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "agan/rng.hpp"

namespace agan {

const std::array<std::string, kNumJoints> kJointNames = {"HD", "NK", "LS", "RS", "LE",
                                                         "RE", "LW", "RW", "LH", "RH"};

const std::array<std::string, kNumCategories> kCategoryNames = {"RL", "RR", "MP", "SL", "SR",
                                                                "PL", "PR", "CL", "CR", "CH"};

int category_from_name(const std::string& name) {
    for (int c = 0; c < kNumCategories; ++c) {
        if (kCategoryNames[c] == name) return c;
    }
    throw DataError("unknown action category: '" + name + "'");
}

void AganetConfig::validate() const {
    if (window_len < 4 || window_len % 4 != 0) {
        throw ShapeError("window_len must be a positive multiple of 4, got " +
                         std::to_string(window_len));
    }
    if (num_joints < 1 || num_categories < 1) {
        throw ShapeError("num_joints and num_categories must be positive");
    }
}

Tensor& ParamStore::param(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw DataError("parameter missing: " + name);
    return it->second;
}

const Tensor& ParamStore::param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw DataError("parameter missing: " + name);
    return it->second;
}

std::int64_t count_parameters(const ParamStore& store) {
    std::int64_t n = 0;
    for (const auto& [name, t] : store.params) n += t.size();
    return n;
}

namespace {

ConvSpec sd_spec(int in, int out) {
    return ConvSpec{3, 5, 1, 1, 1, 2, in, out};
}

ConvSpec td_spec(int in, int out, int stride_t) {
    return ConvSpec{5, 1, stride_t, 1, 2, 0, in, out};
}

ConvSpec one_by_one(int in, int out) {
    return ConvSpec{1, 1, 1, 1, 0, 0, in, out};
}

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t name_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

std::vector<ConvLayerInfo> conv_layers(const AganetConfig& config) {
    config.validate();
    const ChannelPlan& ch = config.channels;
    std::vector<ConvLayerInfo> layers;
    layers.push_back({"sd1", sd_spec(3, ch.sd1)});
    if (config.enable_lsta) layers.push_back({"lsta", td_spec(ch.sd1, ch.sd1, 1)});
    layers.push_back({"sd2", sd_spec(ch.sd1, ch.sd2)});
    layers.push_back({"td1", td_spec(ch.sd2, ch.td[0], 2)});
    layers.push_back({"td2", td_spec(ch.td[0], ch.td[1], 2)});
    layers.push_back({"td3", td_spec(ch.td[1], ch.td[2], 1)});
    layers.push_back({"td4", td_spec(ch.td[2], ch.td[3], 1)});
    if (config.enable_gsa) {
        layers.push_back({"gsa1", td_spec(ch.td[3], ch.gsa_mid, 2)});
        layers.push_back({"gsa2", td_spec(ch.gsa_mid, ch.gsa_mid, 2)});
        layers.push_back({"gsa_proj", one_by_one(2 * ch.gsa_mid, ch.sd2)});
    }
    // Estimation head: collapses the joint axis and maps fused channels to
    // per-category logits at full T resolution.
    const int fused = ch.sd2 + ch.td[3];
    layers.push_back({"head", ConvSpec{1, config.num_joints, 1, 1, 0, 0, fused,
                                       config.num_categories}});
    return layers;
}

ParamStore build(const AganetConfig& config, std::uint64_t seed) {
    config.validate();
    ParamStore store;
    for (const auto& layer : conv_layers(config)) {
        const ConvSpec& s = layer.spec;
        Rng rng(hash_combine(seed, name_hash(layer.name)));
        const int fan_in = s.in_channels * s.kernel_h * s.kernel_w;
        // He init for relu layers; smaller scale for sigmoid-output layers.
        const bool sigmoid_out = layer.name == "lsta" || layer.name == "gsa_proj" ||
                                 layer.name == "head";
        const double stddev = sigmoid_out ? std::sqrt(1.0 / fan_in) : std::sqrt(2.0 / fan_in);
        Tensor w({s.out_channels, s.in_channels, s.kernel_h, s.kernel_w});
        for (double& v : w.data) v = rng.normal(0.0, stddev);
        store.params[layer.name + ".w"] = std::move(w);
        store.params[layer.name + ".b"] = Tensor({s.out_channels});
    }
    for (const auto& [name, t] : store.params) {
        store.moment1[name] = Tensor(t.shape);
        store.moment2[name] = Tensor(t.shape);
    }
    store.adam_step = 0;
    return store;
}

namespace {

Tensor conv_named(const ParamStore& store, const ConvSpec& spec, const std::string& name,
                  const Tensor& input) {
    return conv2d(input, spec, store.param(name + ".w"), store.param(name + ".b"));
}

void add_into(Tensor& dst, const Tensor& src) {
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

constexpr double kScoreEps = 1e-12;

}  // namespace

ForwardTrace forward(const ParamStore& store, const AganetConfig& config, const Tensor& input,
                     const ForwardOptions& opts) {
    config.validate();
    const int T = config.window_len;
    const int K = config.num_joints;
    if (input.shape != std::vector<int>{3, T, K}) {
        throw ShapeError("forward input shape " + shape_str(input.shape) + ", expected (3," +
                         std::to_string(T) + "," + std::to_string(K) + ")");
    }
    const ChannelPlan& ch = config.channels;

    ForwardTrace tr;
    tr.input = input;
    tr.sd1_out = relu(conv_named(store, sd_spec(3, ch.sd1), "sd1", input));

    if (config.enable_lsta) {
        tr.lsta_mask = sigmoid(conv_named(store, td_spec(ch.sd1, ch.sd1, 1), "lsta", tr.sd1_out));
        if (opts.force_lsta_mask_zero) tr.lsta_mask = Tensor(tr.lsta_mask.shape);
        tr.sd1_modulated = residual_modulate(tr.sd1_out, tr.lsta_mask);
    } else {
        tr.sd1_modulated = tr.sd1_out;
    }
    tr.low = relu(conv_named(store, sd_spec(ch.sd1, ch.sd2), "sd2", tr.sd1_modulated));

    tr.td_out[0] = relu(conv_named(store, td_spec(ch.sd2, ch.td[0], 2), "td1", tr.low));
    tr.td_out[1] = relu(conv_named(store, td_spec(ch.td[0], ch.td[1], 2), "td2", tr.td_out[0]));
    tr.td_out[2] = relu(conv_named(store, td_spec(ch.td[1], ch.td[2], 1), "td3", tr.td_out[1]));
    tr.td_out[3] = relu(conv_named(store, td_spec(ch.td[2], ch.td[3], 1), "td4", tr.td_out[2]));
    const Tensor& high = tr.td_out[3];

    if (config.enable_gsa) {
        tr.gsa_hidden[0] =
            relu(conv_named(store, td_spec(ch.td[3], ch.gsa_mid, 2), "gsa1", high));
        tr.gsa_hidden[1] = relu(
            conv_named(store, td_spec(ch.gsa_mid, ch.gsa_mid, 2), "gsa2", tr.gsa_hidden[0]));
        Tensor pooled_max = pool_time(tr.gsa_hidden[1], PoolMode::Max);
        Tensor pooled_avg = pool_time(tr.gsa_hidden[1], PoolMode::Avg);
        tr.gsa_pooled = concat_channels(pooled_max, pooled_avg);
        tr.gsa_squeezed = mean_width(tr.gsa_pooled);
        tr.gsa_weights = sigmoid(
            conv_named(store, one_by_one(2 * ch.gsa_mid, ch.sd2), "gsa_proj", tr.gsa_squeezed));
        if (opts.force_gsa_weights_zero) tr.gsa_weights = Tensor(tr.gsa_weights.shape);
        tr.low_modulated = scale_channels_residual(tr.low, tr.gsa_weights);
    } else {
        tr.low_modulated = tr.low;
    }

    Tensor up = upsample_time(high, 4);
    tr.fused = concat_channels(tr.low_modulated, up);

    const int fused_ch = ch.sd2 + ch.td[3];
    Tensor logits = conv_named(
        store, ConvSpec{1, K, 1, 1, 0, 0, fused_ch, config.num_categories}, "head", tr.fused);
    tr.score_map = clamp(sigmoid(logits), kScoreEps, 1.0 - kScoreEps);

    tr.scores = FrameScores(T, config.num_categories);
    for (int c = 0; c < config.num_categories; ++c)
        for (int t = 0; t < T; ++t) tr.scores.at(t, c) = tr.score_map.at(c, t, 0);
    return tr;
}

Gradient backward(const ParamStore& store, const AganetConfig& config, const ForwardTrace& trace,
                  const FrameScores& upstream) {
    const int T = config.window_len;
    const int K = config.num_joints;
    const int C = config.num_categories;
    const ChannelPlan& ch = config.channels;
    if (upstream.num_frames != T || upstream.num_categories != C) {
        throw ShapeError("backward upstream is " + std::to_string(upstream.num_frames) + "x" +
                         std::to_string(upstream.num_categories) + ", expected " +
                         std::to_string(T) + "x" + std::to_string(C));
    }

    Gradient g;
    auto conv_back = [&](const std::string& name, const ConvSpec& spec, const Tensor& input,
                         const Tensor& up) {
        ConvGrads cg = conv2d_backward(input, spec, store.param(name + ".w"), up);
        g.by_name[name + ".w"] = std::move(cg.weight);
        g.by_name[name + ".b"] = std::move(cg.bias);
        return std::move(cg.input);
    };

    Tensor dscore_map({C, T, 1});
    for (int c = 0; c < C; ++c)
        for (int t = 0; t < T; ++t) dscore_map.at(c, t, 0) = upstream.at(t, c);
    // Clamp at the head is treated as identity for the backward pass.
    Tensor dlogits = sigmoid_backward(trace.score_map, dscore_map);

    const int fused_ch = ch.sd2 + ch.td[3];
    Tensor dfused = conv_back("head", ConvSpec{1, K, 1, 1, 0, 0, fused_ch, C}, trace.fused,
                              dlogits);

    Tensor dlow_mod, dup;
    concat_channels_backward(dfused, ch.sd2, dlow_mod, dup);
    Tensor dhigh = upsample_time_backward(dup, 4);

    Tensor dlow;
    if (config.enable_gsa) {
        Tensor dw_sig;
        scale_channels_residual_backward(trace.low, trace.gsa_weights, dlow_mod, dlow, dw_sig);
        Tensor dzw = sigmoid_backward(trace.gsa_weights, dw_sig);
        Tensor dsq = conv_back("gsa_proj", one_by_one(2 * ch.gsa_mid, ch.sd2), trace.gsa_squeezed,
                               dzw);
        Tensor dpooled = mean_width_backward(dsq, K);
        Tensor dpmax, dpavg;
        concat_channels_backward(dpooled, ch.gsa_mid, dpmax, dpavg);
        Tensor dg2 = pool_time_backward(trace.gsa_hidden[1], PoolMode::Max, dpmax);
        add_into(dg2, pool_time_backward(trace.gsa_hidden[1], PoolMode::Avg, dpavg));
        Tensor dzg2 = relu_backward(trace.gsa_hidden[1], dg2);
        Tensor dg1 = conv_back("gsa2", td_spec(ch.gsa_mid, ch.gsa_mid, 2), trace.gsa_hidden[0],
                               dzg2);
        Tensor dzg1 = relu_backward(trace.gsa_hidden[0], dg1);
        add_into(dhigh, conv_back("gsa1", td_spec(ch.td[3], ch.gsa_mid, 2), trace.td_out[3],
                                  dzg1));
    } else {
        dlow = std::move(dlow_mod);
    }

    Tensor dz = relu_backward(trace.td_out[3], dhigh);
    Tensor dt = conv_back("td4", td_spec(ch.td[2], ch.td[3], 1), trace.td_out[2], dz);
    dz = relu_backward(trace.td_out[2], dt);
    dt = conv_back("td3", td_spec(ch.td[1], ch.td[2], 1), trace.td_out[1], dz);
    dz = relu_backward(trace.td_out[1], dt);
    dt = conv_back("td2", td_spec(ch.td[0], ch.td[1], 2), trace.td_out[0], dz);
    dz = relu_backward(trace.td_out[0], dt);
    add_into(dlow, conv_back("td1", td_spec(ch.sd2, ch.td[0], 2), trace.low, dz));

    Tensor dz2 = relu_backward(trace.low, dlow);
    Tensor da1m = conv_back("sd2", sd_spec(ch.sd1, ch.sd2), trace.sd1_modulated, dz2);

    Tensor da1;
    if (config.enable_lsta) {
        Tensor dmask;
        residual_modulate_backward(trace.sd1_out, trace.lsta_mask, da1m, da1, dmask);
        Tensor dzm = sigmoid_backward(trace.lsta_mask, dmask);
        add_into(da1, conv_back("lsta", td_spec(ch.sd1, ch.sd1, 1), trace.sd1_out, dzm));
    } else {
        da1 = std::move(da1m);
    }
    Tensor dz1 = relu_backward(trace.sd1_out, da1);
    conv_back("sd1", sd_spec(3, ch.sd1), trace.input, dz1);
    return g;
}

Tensor skeleton_to_tensor(std::span<const SkeletonFrame> window, bool normalize) {
    const int T = static_cast<int>(window.size());
    Tensor out({3, T, kNumJoints});
    Vec3 mean{0.0, 0.0, 0.0};
    if (normalize && T > 0) {
        for (const auto& frame : window) {
            mean.x += frame[NK].x;
            mean.y += frame[NK].y;
            mean.z += frame[NK].z;
        }
        mean.x /= T;
        mean.y /= T;
        mean.z /= T;
    }
    for (int t = 0; t < T; ++t) {
        for (int k = 0; k < kNumJoints; ++k) {
            out.at(0, t, k) = window[t][k].x - mean.x;
            out.at(1, t, k) = window[t][k].y - mean.y;
            out.at(2, t, k) = window[t][k].z - mean.z;
        }
    }
    return out;
}

namespace {

void write_raw(std::ofstream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ofstream& os, T v) {
    write_raw(os, &v, sizeof(v));
}

void write_string(std::ofstream& os, const std::string& s) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    write_raw(os, s.data(), s.size());
}

void write_tensor(std::ofstream& os, const std::string& name, const Tensor& t) {
    write_string(os, name);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape) write_pod<std::int64_t>(os, d);
    write_raw(os, t.data.data(), t.data.size() * sizeof(double));
}

void read_raw(std::ifstream& is, void* p, std::size_t n, const std::string& path) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) {
        throw DataError("weights file truncated: " + path);
    }
}

template <typename T>
T read_pod(std::ifstream& is, const std::string& path) {
    T v;
    read_raw(is, &v, sizeof(v), path);
    return v;
}

std::string read_string(std::ifstream& is, const std::string& path) {
    const auto n = read_pod<std::uint32_t>(is, path);
    if (n > (1u << 20)) throw DataError("weights file corrupt (name length): " + path);
    std::string s(n, '\0');
    read_raw(is, s.data(), n, path);
    return s;
}

Tensor read_tensor(std::ifstream& is, const std::string& path) {
    const auto rank = read_pod<std::uint32_t>(is, path);
    if (rank > 8) throw DataError("weights file corrupt (tensor rank): " + path);
    std::vector<int> shape(rank);
    for (auto& d : shape) {
        const auto v = read_pod<std::int64_t>(is, path);
        if (v < 1 || v > (1 << 24)) throw DataError("weights file corrupt (dim): " + path);
        d = static_cast<int>(v);
    }
    Tensor t(shape);
    read_raw(is, t.data.data(), t.data.size() * sizeof(double), path);
    return t;
}

}  // namespace

void save_weights(const std::string& path, const AganetConfig& config, const ParamStore& store) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path);
    write_raw(os, "AGAN", 4);
    write_pod<std::uint32_t>(os, kWeightsFormatVersion);
    write_pod<std::int32_t>(os, config.num_joints);
    write_pod<std::int32_t>(os, config.num_categories);
    write_pod<std::int32_t>(os, config.window_len);
    const std::vector<int> chans{config.channels.sd1,   config.channels.sd2,
                                 config.channels.td[0], config.channels.td[1],
                                 config.channels.td[2], config.channels.td[3],
                                 config.channels.gsa_mid};
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(chans.size()));
    for (int c : chans) write_pod<std::int32_t>(os, c);
    write_pod<std::uint8_t>(os, config.enable_lsta ? 1 : 0);
    write_pod<std::uint8_t>(os, config.enable_gsa ? 1 : 0);
    write_pod<std::uint8_t>(os, config.normalize_input ? 1 : 0);
    write_pod<std::int64_t>(os, store.adam_step);

    const auto count = store.params.size() + store.moment1.size() + store.moment2.size();
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(count));
    for (const auto& [name, t] : store.params) write_tensor(os, name, t);
    for (const auto& [name, t] : store.moment1) write_tensor(os, "m:" + name, t);
    for (const auto& [name, t] : store.moment2) write_tensor(os, "v:" + name, t);
    if (!os) throw DataError("write failed: " + path);
}

LoadedWeights load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open weights file: " + path);
    char magic[4];
    read_raw(is, magic, 4, path);
    if (std::memcmp(magic, "AGAN", 4) != 0) {
        throw DataError("not a weights file (bad magic): " + path);
    }
    const auto version = read_pod<std::uint32_t>(is, path);
    if (version != kWeightsFormatVersion) {
        throw DataError("unsupported weights format version " + std::to_string(version) + ": " +
                        path);
    }
    LoadedWeights lw;
    lw.config.num_joints = read_pod<std::int32_t>(is, path);
    lw.config.num_categories = read_pod<std::int32_t>(is, path);
    lw.config.window_len = read_pod<std::int32_t>(is, path);
    const auto nch = read_pod<std::uint32_t>(is, path);
    if (nch != 7) throw DataError("weights file corrupt (channel plan): " + path);
    std::vector<int> chans(nch);
    for (auto& c : chans) c = read_pod<std::int32_t>(is, path);
    lw.config.channels.sd1 = chans[0];
    lw.config.channels.sd2 = chans[1];
    for (int i = 0; i < 4; ++i) lw.config.channels.td[static_cast<std::size_t>(i)] = chans[2 + i];
    lw.config.channels.gsa_mid = chans[6];
    lw.config.enable_lsta = read_pod<std::uint8_t>(is, path) != 0;
    lw.config.enable_gsa = read_pod<std::uint8_t>(is, path) != 0;
    lw.config.normalize_input = read_pod<std::uint8_t>(is, path) != 0;
    lw.store.adam_step = read_pod<std::int64_t>(is, path);

    const auto count = read_pod<std::uint32_t>(is, path);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = read_string(is, path);
        Tensor t = read_tensor(is, path);
        if (name.rfind("m:", 0) == 0) {
            lw.store.moment1[name.substr(2)] = std::move(t);
        } else if (name.rfind("v:", 0) == 0) {
            lw.store.moment2[name.substr(2)] = std::move(t);
        } else {
            lw.store.params[name] = std::move(t);
        }
    }
    return lw;
}

}  // namespace agan
