#pragma once

#include <cmath>

#include "posekit/error.hpp"
#include "posekit/pose.hpp"
#include "posekit/skeleton.hpp"

namespace posekit {

// squared-area fallback factor shared with the evaluation protocol
constexpr double kBoxAreaToScale = 0.53;

struct OksScale {
    double s_squared = 1.0;

    static OksScale from_area(double area) {
        if (!(area > 0.0)) throw InvalidConfig("OKS scale needs area > 0");
        return {area};
    }

    /// Annotated area when available, otherwise pseudo-box area * 0.53.
    static OksScale from_instance(const GroundTruthInstance& gt) {
        if (gt.has_area()) return {gt.area};
        double a = gt.box.area() * kBoxAreaToScale;
        if (!(a > 0.0)) a = 1.0;  // degenerate single-keypoint box
        return {a};
    }
};

/// Keypoint-wise Gaussian similarity averaged over the labeled GT keypoints.
inline double compute_oks(const Pose& pred, const Pose& gt, OksScale scale,
                          const SkeletonSpec& spec) {
    if (pred.size() != spec.k || gt.size() != spec.k)
        throw ShapeMismatch("pose keypoint count vs skeleton");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < spec.k; ++i) {
        if (!gt.labeled(i)) continue;
        const double dx = pred.keypoints[i].x - gt.keypoints[i].x;
        const double dy = pred.keypoints[i].y - gt.keypoints[i].y;
        const double kappa = spec.kappas[i];
        sum += std::exp(-(dx * dx + dy * dy) / (2.0 * scale.s_squared * kappa * kappa));
        ++n;
    }
    if (n == 0) throw NoLabeledKeypoints();
    return sum / static_cast<double>(n);
}

/// OKS between two detections for NMS: the second detection supplies the
/// visibility (all labeled) and its pseudo-box supplies the scale.
inline double detection_oks(const Detection& a, const Detection& b, const SkeletonSpec& spec) {
    GroundTruthInstance gt;
    gt.pose = b.pose;
    gt.box = pseudo_box(b.pose);
    return compute_oks(a.pose, b.pose, OksScale::from_instance(gt), spec);
}

}  // namespace posekit
