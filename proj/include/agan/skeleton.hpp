#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace agan {

// Upper-body joint set, fixed order.
enum Joint : int { HD = 0, NK, LS, RS, LE, RE, LW, RW, LH, RH };
constexpr int kNumJoints = 10;
extern const std::array<std::string, kNumJoints> kJointNames;

// Action vocabulary, fixed order.
enum Category : int {
    RL = 0,  // raise left hand
    RR,      // raise right hand
    MP,      // pause gesture
    SL,      // swing left hand
    SR,      // swing right hand
    PL,      // push forward left
    PR,      // push forward right
    CL,      // circle left hand
    CR,      // circle right hand
    CH,      // cross hands
};
constexpr int kNumCategories = 10;
extern const std::array<std::string, kNumCategories> kCategoryNames;

/// Parses a category name ("RL", ...). Throws DataError on unknown names.
int category_from_name(const std::string& name);

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

using SkeletonFrame = std::array<Vec3, kNumJoints>;

/// A stream of skeleton frames in camera coordinates (meters), 30 fps.
struct SkeletonSequence {
    std::vector<SkeletonFrame> frames;
    int fps = 30;

    int length() const { return static_cast<int>(frames.size()); }
};

/// Ground-truth action instance; end_frame is exclusive.
struct ActionAnnotation {
    int category = 0;
    int start_frame = 0;
    int end_frame = 0;

    int length() const { return end_frame - start_frame; }
};

}  // namespace agan
