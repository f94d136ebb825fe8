#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "posekit/error.hpp"
#include "posekit/grid.hpp"
#include "posekit/pose.hpp"

namespace posekit {

/// Dense per-location pose prediction: coarse offsets, refinement residuals
/// and the two ranking scores.
struct PoseHypothesis {
    GridLocation location;
    std::vector<Point> offsets1;  // image pixels
    std::vector<Point> offsets2;  // image pixels
    double cls_score = 0.0;
    double pose_score = 0.0;
};

inline Pose decode_initial(const PoseHypothesis& h) {
    Pose p;
    p.keypoints.reserve(h.offsets1.size());
    p.visibility.assign(h.offsets1.size(), 2);
    for (const Point& d : h.offsets1)
        p.keypoints.push_back({h.location.x_c + d.x, h.location.y_c + d.y});
    return p;
}

inline Pose decode_refined(const PoseHypothesis& h) {
    Pose p;
    p.keypoints.reserve(h.offsets1.size());
    p.visibility.assign(h.offsets1.size(), 2);
    for (std::size_t j = 0; j < h.offsets1.size(); ++j)
        p.keypoints.push_back({h.location.x_c + h.offsets1[j].x + h.offsets2[j].x,
                               h.location.y_c + h.offsets1[j].y + h.offsets2[j].y});
    return p;
}

/// Default kernel positions of a 3x3 deformable kernel, row-major, unit spacing.
inline std::array<Point, 9> kernel_grid() {
    return {{{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {0, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}}};
}

/// Keypoint indices steering the 8 non-center kernel cells. The 17-keypoint
/// default picks the torso and limb joints: shoulders, elbows, hips, knees.
inline std::array<std::size_t, 8> default_sampling_subset() {
    return {5, 6, 7, 8, 11, 12, 13, 14};
}

/// Deterministic surrogate for the learned offset-field projection: the
/// center cell samples at the hypothesis location, the other 8 cells sample
/// at the selected coarse keypoints. Offsets are relative to the default
/// kernel grid.
inline std::array<Point, 9> derive_sampling_offsets(
    const std::vector<Point>& offsets1,
    const std::array<std::size_t, 8>& subset = default_sampling_subset()) {
    if (offsets1.size() < 9) throw TooFewKeypoints(offsets1.size());
    for (std::size_t idx : subset)
        if (idx >= offsets1.size()) throw OutOfRange("sampling subset index");
    const auto grid = kernel_grid();
    std::array<Point, 9> out;
    std::size_t next = 0;
    for (std::size_t cell = 0; cell < 9; ++cell) {
        const Point target = (cell == 4) ? Point{0, 0} : offsets1[subset[next++]];
        out[cell] = target - grid[cell];
    }
    return out;
}

}  // namespace posekit
