#include "agan/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>

namespace agan {

void CameraIntrinsics::validate() const {
    if (fx <= 0.0 || fy <= 0.0) throw DataError("camera focal lengths must be positive");
}

std::optional<Roi> extract_roi(const AttentionMap& map, double bin_threshold, int src_w,
                               int src_h) {
    if (!(bin_threshold > 0.0 && bin_threshold < 1.0)) {
        throw DataError("binarization threshold must lie in (0,1)");
    }
    if (src_w < 1 || src_h < 1) throw DataError("source resolution must be positive");
    const int H = map.height, W = map.width;

    // BFS labeling of 4-connected components of the binarized map.
    std::vector<int> label(static_cast<std::size_t>(H) * W, -1);
    auto idx = [W](int r, int c) { return static_cast<std::size_t>(r) * W + c; };
    auto on = [&](int r, int c) { return map.at(r, c) > bin_threshold; };

    struct Component {
        int size = 0;
        int r0 = 0, r1 = 0, c0 = 0, c1 = 0;
    };
    std::vector<Component> components;

    std::deque<std::pair<int, int>> queue;
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            if (!on(r, c) || label[idx(r, c)] >= 0) continue;
            const int id = static_cast<int>(components.size());
            Component comp{0, r, r, c, c};
            label[idx(r, c)] = id;
            queue.push_back({r, c});
            while (!queue.empty()) {
                const auto [cr, cc] = queue.front();
                queue.pop_front();
                comp.size += 1;
                comp.r0 = std::min(comp.r0, cr);
                comp.r1 = std::max(comp.r1, cr);
                comp.c0 = std::min(comp.c0, cc);
                comp.c1 = std::max(comp.c1, cc);
                const int dr[4] = {-1, 1, 0, 0};
                const int dc[4] = {0, 0, -1, 1};
                for (int d = 0; d < 4; ++d) {
                    const int nr = cr + dr[d], nc = cc + dc[d];
                    if (nr < 0 || nr >= H || nc < 0 || nc >= W) continue;
                    if (!on(nr, nc) || label[idx(nr, nc)] >= 0) continue;
                    label[idx(nr, nc)] = id;
                    queue.push_back({nr, nc});
                }
            }
            components.push_back(comp);
        }
    }
    if (components.empty()) return std::nullopt;

    // Largest by pixel count; lowest label wins ties (labels are assigned in
    // raster-scan discovery order).
    std::size_t best = 0;
    for (std::size_t i = 1; i < components.size(); ++i) {
        if (components[i].size > components[best].size) best = i;
    }
    const Component& comp = components[best];

    // Map-grid rectangle to source pixels: floor for the origin, ceil for
    // the far edge.
    const double sx = static_cast<double>(src_w) / W;
    const double sy = static_cast<double>(src_h) / H;
    Roi roi;
    roi.x = static_cast<int>(std::floor(comp.c0 * sx));
    roi.y = static_cast<int>(std::floor(comp.r0 * sy));
    const int x1 = std::min(src_w, static_cast<int>(std::ceil((comp.c1 + 1) * sx)));
    const int y1 = std::min(src_h, static_cast<int>(std::ceil((comp.r1 + 1) * sy)));
    roi.width = std::max(1, x1 - roi.x);
    roi.height = std::max(1, y1 - roi.y);
    return roi;
}

Vec3 backproject(double u, double v, double depth, const CameraIntrinsics& intr) {
    intr.validate();
    if (!(depth > 0.0)) throw DataError("depth must be positive, got " + std::to_string(depth));
    return {(u - intr.cx) * depth / intr.fx, (v - intr.cy) * depth / intr.fy, depth};
}

void project(const Vec3& p, const CameraIntrinsics& intr, double& u, double& v) {
    intr.validate();
    if (!(p.z > 0.0)) throw DataError("cannot project a point with non-positive depth");
    u = p.x * intr.fx / p.z + intr.cx;
    v = p.y * intr.fy / p.z + intr.cy;
}

namespace {

double squared_l2_diff(const AttentionMap& a, const AttentionMap& b) {
    if (a.height != b.height || a.width != b.width) {
        throw ShapeError("map shapes differ: " + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                         std::to_string(b.width));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace

double attention_supervision_loss(const std::vector<AttentionMap>& predicted_stacks,
                                  const std::vector<AttentionMap>& gt_stacks) {
    if (predicted_stacks.size() != gt_stacks.size()) {
        throw ShapeError("stack counts differ: " + std::to_string(predicted_stacks.size()) +
                         " vs " + std::to_string(gt_stacks.size()));
    }
    double loss = 0.0;
    for (std::size_t t = 0; t < predicted_stacks.size(); ++t) {
        loss += squared_l2_diff(predicted_stacks[t], gt_stacks[t]);
    }
    return loss;
}

double pose_supervision_loss(const std::vector<std::vector<AttentionMap>>& predicted_stacks,
                             const std::vector<std::vector<AttentionMap>>& gt_stacks) {
    if (predicted_stacks.size() != gt_stacks.size()) {
        throw ShapeError("stack counts differ: " + std::to_string(predicted_stacks.size()) +
                         " vs " + std::to_string(gt_stacks.size()));
    }
    double loss = 0.0;
    for (std::size_t t = 0; t < predicted_stacks.size(); ++t) {
        if (predicted_stacks[t].size() != gt_stacks[t].size()) {
            throw ShapeError("joint map counts differ in stack " + std::to_string(t));
        }
        for (std::size_t k = 0; k < predicted_stacks[t].size(); ++k) {
            loss += squared_l2_diff(predicted_stacks[t][k], gt_stacks[t][k]);
        }
    }
    return loss;
}

AttentionMap read_map_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open map file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            double v = 0.0;
            const char* begin = line.data() + pos;
            const char* end = line.data() + comma;
            auto res = std::from_chars(begin, end, v);
            if (res.ec != std::errc() || res.ptr != end) {
                throw DataError(path + ":" + std::to_string(line_no) + ": bad number '" +
                                line.substr(pos, comma - pos) + "'");
            }
            row.push_back(v);
            pos = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DataError(path + ":" + std::to_string(line_no) + ": ragged row");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(path + ": empty map");
    AttentionMap map(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int r = 0; r < map.height; ++r)
        for (int c = 0; c < map.width; ++c) map.at(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    return map;
}

}  // namespace agan
