#include "agan/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "agan/errors.hpp"

namespace agan {

namespace fs = std::filesystem;
using json = nlohmann::json;

void SubjectProfile::validate() const {
    if (limb_scale < 0.8 || limb_scale > 1.2 || tempo < 0.8 || tempo > 1.2) {
        throw DataError("subject scales must lie in [0.8, 1.2]");
    }
}

SubjectProfile make_subject_profile(std::uint64_t dataset_seed, int subject_index) {
    Rng rng(hash_combine(dataset_seed, 0x737562ULL, static_cast<std::uint64_t>(subject_index)));
    SubjectProfile p;
    p.limb_scale = rng.uniform(0.8, 1.2);
    p.tempo = rng.uniform(0.8, 1.2);
    p.base_pos = {rng.uniform(-0.4, 0.4), rng.uniform(-0.1, 0.1), rng.uniform(2.0, 3.0)};
    p.seed = hash_combine(dataset_seed, static_cast<std::uint64_t>(subject_index));
    return p;
}

namespace {

constexpr int kFps = 30;

// Rest pose relative to the neck; x points to the subject's left in view,
// y up, z toward the scene (camera at origin looking along +z).
SkeletonFrame rest_pose(double s) {
    SkeletonFrame f;
    f[HD] = {0.0, 0.25 * s, 0.02 * s};
    f[NK] = {0.0, 0.0, 0.0};
    f[LS] = {0.175 * s, -0.02 * s, 0.0};
    f[RS] = {-0.175 * s, -0.02 * s, 0.0};
    f[LE] = {0.21 * s, -0.30 * s, 0.0};
    f[RE] = {-0.21 * s, -0.30 * s, 0.0};
    f[LW] = {0.22 * s, -0.58 * s, 0.0};
    f[RW] = {-0.22 * s, -0.58 * s, 0.0};
    f[LH] = {0.15 * s, -0.50 * s, 0.02 * s};
    f[RH] = {-0.15 * s, -0.50 * s, 0.02 * s};
    return f;
}

// Smooth attack/hold/release envelope over tau in [0,1].
double envelope(double tau) {
    auto smooth = [](double u) { return u * u * (3.0 - 2.0 * u); };
    if (tau < 0.25) return smooth(tau / 0.25);
    if (tau > 0.75) return smooth((1.0 - tau) / 0.25);
    return 1.0;
}

struct ArmTargets {
    bool left = false;
    bool right = false;
    Vec3 lw, le, rw, re;  // offsets relative to the neck, pre-scale units
};

Vec3 mirror_x(const Vec3& v) { return {-v.x, v.y, v.z}; }

// Per-instance wrist/elbow trajectory of one action category at phase tau.
// style provides small per-subject habit jitter, tempo scales oscillation
// counts.
ArmTargets primitive_targets(int category, double tau, const double style[4], double tempo) {
    const Vec3 ls{0.175, -0.02, 0.0};
    const Vec3 rs{-0.175, -0.02, 0.0};
    auto elbow_for = [](const Vec3& shoulder, const Vec3& wrist) {
        return Vec3{shoulder.x + 0.55 * (wrist.x - shoulder.x) + 0.03,
                    shoulder.y + 0.55 * (wrist.y - shoulder.y) - 0.04,
                    shoulder.z + 0.55 * (wrist.z - shoulder.z) - 0.03};
    };
    auto add = [](const Vec3& a, const Vec3& b) {
        return Vec3{a.x + b.x, a.y + b.y, a.z + b.z};
    };

    ArmTargets t;
    Vec3 lw{};
    bool left_only = true;
    switch (category) {
        case RL:
        case RR:
            lw = add(ls, {0.06 + 0.02 * style[0], 0.52 + 0.03 * style[1], -0.06});
            break;
        case SL:
        case SR: {
            const double swings = 2.0 + 0.5 * style[0];
            lw = add(ls, {0.08 + 0.22 * std::sin(2.0 * M_PI * swings * tau * tempo),
                          0.32 + 0.02 * style[1], -0.10});
            break;
        }
        case PL:
        case PR: {
            const double pulse = 0.5 - 0.5 * std::cos(2.0 * M_PI * 2.0 * tau * tempo);
            lw = add(ls, {0.05 + 0.02 * style[0], 0.10 + 0.02 * style[1], -0.12 - 0.24 * pulse});
            break;
        }
        case CL:
        case CR: {
            const double loops = 2.0 * tempo;
            lw = add(ls, {0.05 + 0.12 * std::sin(2.0 * M_PI * loops * tau),
                          0.24 + 0.12 * std::cos(2.0 * M_PI * loops * tau) + 0.02 * style[1],
                          -0.12});
            break;
        }
        case MP:
            t.left = t.right = true;
            t.lw = add(ls, {-0.06, 0.14 + 0.02 * style[0], -0.26});
            t.rw = add(rs, {0.06, 0.14 + 0.02 * style[0], -0.26});
            t.le = elbow_for(ls, t.lw);
            t.re = mirror_x(elbow_for(mirror_x(rs), mirror_x(t.rw)));
            left_only = false;
            break;
        case CH:
            t.left = t.right = true;
            t.lw = {-0.04, -0.12 + 0.02 * style[0], -0.20};
            t.rw = {0.04, -0.12 + 0.02 * style[0], -0.20};
            t.le = elbow_for(ls, t.lw);
            t.re = mirror_x(elbow_for(mirror_x(rs), mirror_x(t.rw)));
            left_only = false;
            break;
        default:
            throw DataError("unknown category id " + std::to_string(category));
    }

    if (left_only) {
        const bool is_left = category == RL || category == SL || category == PL || category == CL;
        if (is_left) {
            t.left = true;
            t.lw = lw;
            t.le = elbow_for(ls, lw);
        } else {
            t.right = true;
            t.rw = mirror_x(lw);
            t.re = mirror_x(elbow_for(ls, lw));
        }
    }
    return t;
}

struct SwayOsc {
    double amp, freq, phase;
    double at(double time) const { return amp * std::sin(2.0 * M_PI * freq * time + phase); }
};

}  // namespace

GeneratedStream generate_stream(const SubjectProfile& subject, int num_instances, Rng& rng,
                                const GenOptions& options) {
    subject.validate();
    if (num_instances < 0) throw DataError("num_instances must be >= 0");
    const double s = subject.limb_scale;

    // Habit: fixed per (subject, category).
    double style[kNumCategories][4];
    for (int c = 0; c < kNumCategories; ++c) {
        Rng style_rng(hash_combine(subject.seed, 0x7374796cULL, static_cast<std::uint64_t>(c)));
        for (int i = 0; i < 4; ++i) style[c][i] = style_rng.uniform(-1.0, 1.0);
    }

    // Smooth idle sway: one global torso oscillation plus small per-joint
    // wobble, all deterministic for the subject.
    Rng sway_rng(hash_combine(subject.seed, 0x73776179ULL));
    SwayOsc global[3];
    for (int a = 0; a < 3; ++a) {
        global[a] = {a == 1 ? 0.006 : 0.012, sway_rng.uniform(0.15, 0.35),
                     sway_rng.uniform(0.0, 2.0 * M_PI)};
    }
    SwayOsc wobble[kNumJoints][3];
    for (int j = 0; j < kNumJoints; ++j)
        for (int a = 0; a < 3; ++a)
            wobble[j][a] = {0.004, sway_rng.uniform(0.3, 0.8), sway_rng.uniform(0.0, 2.0 * M_PI)};

    // Schedule: idle gap, instance, idle gap, ... categories cycle and are
    // shuffled so that num_instances == 10 covers each category once.
    std::vector<int> cats(static_cast<std::size_t>(num_instances));
    for (int i = 0; i < num_instances; ++i) cats[static_cast<std::size_t>(i)] = i % kNumCategories;
    rng.shuffle(cats);

    std::vector<ActionAnnotation> annotations;
    int cursor = static_cast<int>(std::lround(rng.uniform(1.0, 4.0) * kFps));
    for (int i = 0; i < num_instances; ++i) {
        const int dur = static_cast<int>(std::lround(rng.uniform(1.0, 3.0) * kFps));
        annotations.push_back({cats[static_cast<std::size_t>(i)], cursor, cursor + dur});
        cursor += dur + static_cast<int>(std::lround(rng.uniform(1.0, 4.0) * kFps));
    }
    const int total_frames = cursor;

    // Camera drift: slow yaw about the vertical axis plus ground-plane
    // translation (a wheeled platform cannot roll or pitch).
    Rng drift_rng(hash_combine(subject.seed, 0x64726966ULL, rng.next_u64()));
    const double yaw_amp = options.camera_drift ? (3.0 * M_PI / 180.0) : 0.0;
    const double yaw_freq = drift_rng.uniform(0.015, 0.03);
    const double yaw_phase = drift_rng.uniform(0.0, 2.0 * M_PI);
    const double tx_amp = options.camera_drift ? 0.06 : 0.0;
    const double tz_amp = options.camera_drift ? 0.08 : 0.0;
    const double tx_freq = drift_rng.uniform(0.02, 0.04);
    const double tz_freq = drift_rng.uniform(0.015, 0.035);
    const double tx_phase = drift_rng.uniform(0.0, 2.0 * M_PI);
    const double tz_phase = drift_rng.uniform(0.0, 2.0 * M_PI);

    const SkeletonFrame rest = rest_pose(s);
    GeneratedStream out;
    out.sequence.fps = kFps;
    out.sequence.frames.reserve(static_cast<std::size_t>(total_frames));

    std::size_t ann_idx = 0;
    for (int t = 0; t < total_frames; ++t) {
        const double time = static_cast<double>(t) / kFps;
        SkeletonFrame frame = rest;
        const double gx = global[0].at(time), gy = global[1].at(time), gz = global[2].at(time);
        for (int j = 0; j < kNumJoints; ++j) {
            frame[j].x += gx + wobble[j][0].at(time);
            frame[j].y += gy + wobble[j][1].at(time);
            frame[j].z += gz + wobble[j][2].at(time);
        }

        while (ann_idx < annotations.size() && t >= annotations[ann_idx].end_frame) ++ann_idx;
        if (ann_idx < annotations.size() && t >= annotations[ann_idx].start_frame) {
            const ActionAnnotation& ann = annotations[ann_idx];
            const double tau =
                static_cast<double>(t - ann.start_frame) / static_cast<double>(ann.length());
            const double e = envelope(tau);
            const ArmTargets tgt =
                primitive_targets(ann.category, tau, style[ann.category], subject.tempo);
            auto blend = [&](int joint, const Vec3& target) {
                frame[joint].x += e * (target.x * s - rest[joint].x);
                frame[joint].y += e * (target.y * s - rest[joint].y);
                frame[joint].z += e * (target.z * s - rest[joint].z);
            };
            if (tgt.left) {
                blend(LW, tgt.lw);
                blend(LE, tgt.le);
            }
            if (tgt.right) {
                blend(RW, tgt.rw);
                blend(RE, tgt.re);
            }
        }

        const double yaw = yaw_amp * std::sin(2.0 * M_PI * yaw_freq * time + yaw_phase);
        const double tx = tx_amp * std::sin(2.0 * M_PI * tx_freq * time + tx_phase);
        const double tz = tz_amp * std::sin(2.0 * M_PI * tz_freq * time + tz_phase);
        const double cy = std::cos(yaw), sy = std::sin(yaw);
        for (int j = 0; j < kNumJoints; ++j) {
            const double wx = frame[j].x + subject.base_pos.x;
            const double wy = frame[j].y + subject.base_pos.y;
            const double wz = frame[j].z + subject.base_pos.z;
            frame[j] = {cy * wx + sy * wz + tx, wy, -sy * wx + cy * wz + tz};
        }
        out.sequence.frames.push_back(frame);
    }
    out.annotations = annotations;
    return out;
}

// --- dataset files ---------------------------------------------------------

namespace {

void append_double(std::string& line, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    line.append(buf, res.ptr);
}

double parse_double(const std::string& field, const std::string& path, int line_no) {
    double v = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end) {
        throw DataError(path + ":" + std::to_string(line_no) + ": bad number '" + field + "'");
    }
    return v;
}

}  // namespace

void write_stream_csv(const std::string& path, const SkeletonSequence& seq) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path);
    std::string line = "frame";
    for (const auto& j : kJointNames) {
        line += "," + j + "_x," + j + "_y," + j + "_z";
    }
    os << line << "\n";
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        line.clear();
        line += std::to_string(t);
        for (const auto& joint : seq.frames[t]) {
            line += ',';
            append_double(line, joint.x);
            line += ',';
            append_double(line, joint.y);
            line += ',';
            append_double(line, joint.z);
        }
        os << line << "\n";
    }
    if (!os) throw DataError("write failed: " + path);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

SkeletonFrame parse_skeleton_row(const std::vector<std::string>& fields, const std::string& path,
                                 int line_no) {
    if (fields.size() != 1 + 3 * kNumJoints) {
        throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(1 + 3 * kNumJoints) + " fields, got " +
                        std::to_string(fields.size()));
    }
    SkeletonFrame frame;
    for (int j = 0; j < kNumJoints; ++j) {
        frame[j].x = parse_double(fields[1 + 3 * j], path, line_no);
        frame[j].y = parse_double(fields[2 + 3 * j], path, line_no);
        frame[j].z = parse_double(fields[3 + 3 * j], path, line_no);
    }
    return frame;
}

SkeletonSequence read_stream_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open stream file: " + path);
    SkeletonSequence seq;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line_no == 1) {
            if (line.rfind("frame,", 0) != 0) {
                throw DataError(path + ":1: missing CSV header");
            }
            continue;
        }
        if (line.empty()) continue;
        seq.frames.push_back(parse_skeleton_row(split_csv_line(line), path, line_no));
    }
    return seq;
}

void write_annotations_json(const std::string& path,
                            const std::vector<ActionAnnotation>& annotations) {
    json arr = json::array();
    for (const auto& ann : annotations) {
        arr.push_back({{"category", kCategoryNames[static_cast<std::size_t>(ann.category)]},
                       {"start", ann.start_frame},
                       {"end", ann.end_frame}});
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << arr.dump(2) << "\n";
    if (!os) throw DataError("write failed: " + path);
}

std::vector<ActionAnnotation> read_annotations_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open annotation file: " + path);
    json arr;
    try {
        is >> arr;
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    if (!arr.is_array()) throw DataError(path + ": expected a JSON array");
    std::vector<ActionAnnotation> annotations;
    for (const auto& item : arr) {
        try {
            ActionAnnotation ann;
            ann.category = category_from_name(item.at("category").get<std::string>());
            ann.start_frame = item.at("start").get<int>();
            ann.end_frame = item.at("end").get<int>();
            if (ann.start_frame < 0 || ann.end_frame <= ann.start_frame) {
                throw DataError(path + ": invalid annotation bounds [" +
                                std::to_string(ann.start_frame) + "," +
                                std::to_string(ann.end_frame) + ")");
            }
            annotations.push_back(ann);
        } catch (const json::exception& e) {
            throw DataError(path + ": " + e.what());
        }
    }
    return annotations;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
    json entries = json::array();
    for (const auto& e : manifest.entries) {
        entries.push_back({{"subject", e.subject},
                           {"stream", e.stream_csv},
                           {"annotations", e.annotations_json}});
    }
    json doc{{"format_version", kDatasetFormatVersion},
             {"train_subjects", manifest.train_subjects},
             {"test_subjects", manifest.test_subjects},
             {"streams", entries}};
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << doc.dump(2) << "\n";
    if (!os) throw DataError("write failed: " + path);
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open manifest: " + path);
    json doc;
    try {
        is >> doc;
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    try {
        if (doc.at("format_version").get<std::uint32_t>() != kDatasetFormatVersion) {
            throw DataError(path + ": unsupported dataset format version");
        }
        DatasetManifest m;
        m.train_subjects = doc.at("train_subjects").get<std::vector<int>>();
        m.test_subjects = doc.at("test_subjects").get<std::vector<int>>();
        for (const auto& item : doc.at("streams")) {
            DatasetEntry e;
            e.subject = item.at("subject").get<int>();
            e.stream_csv = item.at("stream").get<std::string>();
            e.annotations_json = item.at("annotations").get<std::string>();
            m.entries.push_back(std::move(e));
        }
        return m;
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
}

std::vector<LoadedStream> load_split(const std::string& manifest_path, const std::string& split) {
    const DatasetManifest manifest = read_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<int> wanted;
    if (split == "train") {
        wanted = manifest.train_subjects;
    } else if (split == "test") {
        wanted = manifest.test_subjects;
    } else if (split == "all") {
        wanted = manifest.train_subjects;
        wanted.insert(wanted.end(), manifest.test_subjects.begin(),
                      manifest.test_subjects.end());
    } else {
        throw UsageError("unknown split '" + split + "' (use train, test or all)");
    }
    std::vector<LoadedStream> streams;
    for (const auto& entry : manifest.entries) {
        if (std::find(wanted.begin(), wanted.end(), entry.subject) == wanted.end()) continue;
        LoadedStream ls;
        ls.subject = entry.subject;
        ls.sequence = read_stream_csv((base / entry.stream_csv).string());
        ls.annotations = read_annotations_json((base / entry.annotations_json).string());
        streams.push_back(std::move(ls));
    }
    return streams;
}

}  // namespace agan
