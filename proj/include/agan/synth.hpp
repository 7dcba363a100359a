#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agan/rng.hpp"
#include "agan/skeleton.hpp"

namespace agan {

/// Per-subject body shape and habit parameters.
struct SubjectProfile {
    double limb_scale = 1.0;  // in [0.8, 1.2]
    double tempo = 1.0;       // in [0.8, 1.2]
    Vec3 base_pos{0.0, 0.0, 2.5};
    std::uint64_t seed = 0;

    void validate() const;
};

/// Deterministic profile for subject_index under a dataset seed.
SubjectProfile make_subject_profile(std::uint64_t dataset_seed, int subject_index);

struct GenOptions {
    bool camera_drift = true;  // slow ground-plane rotation/translation of the viewpoint
};

struct GeneratedStream {
    SkeletonSequence sequence;
    std::vector<ActionAnnotation> annotations;
};

/// A labeled skeleton stream: rest-pose idle sway with one motion primitive
/// spliced in per action instance. With num_instances == 10 each category
/// appears exactly once (shuffled order); otherwise categories cycle.
/// Annotations are exact by construction and never overlap.
GeneratedStream generate_stream(const SubjectProfile& subject, int num_instances, Rng& rng,
                                const GenOptions& options = {});

// --- dataset files ---------------------------------------------------------

/// One CSV per stream: header then rows "frame,HD_x,HD_y,HD_z,...,RH_z".
/// Doubles are written in shortest round-trip form, so write/read is
/// lossless.
void write_stream_csv(const std::string& path, const SkeletonSequence& seq);
SkeletonSequence read_stream_csv(const std::string& path);

/// One CSV skeleton row (frame index plus 30 coordinates). Throws DataError
/// naming path:line on malformed input. Used by file reading and the live
/// stdin feed alike.
SkeletonFrame parse_skeleton_row(const std::vector<std::string>& fields, const std::string& path,
                                 int line_no);
std::vector<std::string> split_csv_line(const std::string& line);

/// Sidecar annotation file: JSON array of {category, start, end}.
void write_annotations_json(const std::string& path,
                            const std::vector<ActionAnnotation>& annotations);
std::vector<ActionAnnotation> read_annotations_json(const std::string& path);

constexpr std::uint32_t kDatasetFormatVersion = 1;

struct DatasetEntry {
    int subject = 0;
    std::string stream_csv;      // relative to the manifest directory
    std::string annotations_json;
};

struct DatasetManifest {
    std::vector<int> train_subjects;
    std::vector<int> test_subjects;
    std::vector<DatasetEntry> entries;
};

void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

struct LoadedStream {
    int subject = 0;
    SkeletonSequence sequence;
    std::vector<ActionAnnotation> annotations;
};

/// Loads all streams of a split ("train", "test" or "all").
std::vector<LoadedStream> load_split(const std::string& manifest_path, const std::string& split);

}  // namespace agan
