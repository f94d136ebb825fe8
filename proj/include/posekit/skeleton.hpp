#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "posekit/error.hpp"

namespace posekit {

/// Keypoint layout of the pose model: count, names, per-keypoint OKS
/// falloff constants and left/right flip pairs.
struct SkeletonSpec {
    std::size_t k = 0;
    std::vector<std::string> names;
    std::vector<double> kappas;
    std::vector<std::pair<std::size_t, std::size_t>> flip_pairs;

    void validate() const {
        if (k < 1) throw InvalidConfig("skeleton needs k >= 1");
        if (names.size() != k) throw InvalidConfig("names size != k");
        if (kappas.size() != k) throw InvalidConfig("kappas size != k");
        for (double kappa : kappas)
            if (!(kappa > 0.0)) throw InvalidConfig("kappas must be > 0");
        for (auto [a, b] : flip_pairs)
            if (a >= k || b >= k) throw InvalidConfig("flip pair index out of range");
    }
};

/// The 17-keypoint COCO skeleton with the published falloff constants.
inline SkeletonSpec coco_skeleton() {
    SkeletonSpec s;
    s.k = 17;
    s.names = {"nose",          "left_eye",      "right_eye",  "left_ear",
               "right_ear",     "left_shoulder", "right_shoulder",
               "left_elbow",    "right_elbow",   "left_wrist", "right_wrist",
               "left_hip",      "right_hip",     "left_knee",  "right_knee",
               "left_ankle",    "right_ankle"};
    // kappa_i = 2 * sigma_i with the standard COCO keypoint sigmas
    s.kappas = {0.052, 0.050, 0.050, 0.070, 0.070, 0.158, 0.158, 0.144, 0.144,
                0.124, 0.124, 0.214, 0.214, 0.174, 0.174, 0.178, 0.178};
    s.flip_pairs = {{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 10}, {11, 12}, {13, 14}, {15, 16}};
    return s;
}

}  // namespace posekit
