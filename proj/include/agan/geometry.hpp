#pragma once

#include <optional>
#include <string>
#include <vector>

#include "agan/errors.hpp"
#include "agan/skeleton.hpp"

namespace agan {

/// Dense H x W attention grid with values in [0,1].
struct AttentionMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    AttentionMap() = default;
    AttentionMap(int h, int w) : height(h), width(w), values(static_cast<std::size_t>(h) * w, 0.0) {}

    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
};

struct CameraIntrinsics {
    double fx = 500.0;
    double fy = 500.0;
    double cx = 320.0;
    double cy = 240.0;

    void validate() const;
};

/// Axis-aligned rectangle in source-image pixels.
struct Roi {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
};

/// Binarize the map (value > threshold), take the largest 4-connected
/// component (lowest label on size ties), and scale its minimum bounding
/// rectangle from map resolution to src_w x src_h (floor for the origin,
/// ceil for the far edge). Returns nullopt when nothing exceeds the
/// threshold.
std::optional<Roi> extract_roi(const AttentionMap& map, double bin_threshold, int src_w,
                               int src_h);

/// Pinhole back-projection: pixel (u,v) at the given depth (meters) to
/// camera-frame coordinates.
Vec3 backproject(double u, double v, double depth, const CameraIntrinsics& intr);

/// Pinhole projection of a camera-frame point to pixel coordinates.
void project(const Vec3& p, const CameraIntrinsics& intr, double& u, double& v);

/// Sum over stacked prediction maps of squared L2 differences to the
/// ground-truth map.
double attention_supervision_loss(const std::vector<AttentionMap>& predicted_stacks,
                                  const std::vector<AttentionMap>& gt_stacks);

/// Same, additionally summed over per-joint maps: stacks x joints maps each.
double pose_supervision_loss(const std::vector<std::vector<AttentionMap>>& predicted_stacks,
                             const std::vector<std::vector<AttentionMap>>& gt_stacks);

/// Reads an attention map from CSV (one row of comma-separated values per
/// grid row). Used by the roi CLI subcommand.
AttentionMap read_map_csv(const std::string& path);

}  // namespace agan
