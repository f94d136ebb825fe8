#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "posekit/error.hpp"

namespace posekit {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }

/// COCO visibility convention: 0 unlabeled, 1 labeled occluded, 2 labeled visible.
struct Pose {
    std::vector<Point> keypoints;
    std::vector<int> visibility;

    std::size_t size() const { return keypoints.size(); }

    bool labeled(std::size_t i) const { return visibility[i] > 0; }

    std::size_t labeled_count() const {
        std::size_t n = 0;
        for (int v : visibility) n += (v > 0);
        return n;
    }
};

struct PseudoBox {
    double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    double max_side() const { return std::max(width(), height()); }
    Point center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }

    bool contains(double x, double y) const {
        return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
    }
};

/// Tight min/max box over the labeled keypoints only.
inline PseudoBox pseudo_box(const Pose& pose) {
    bool any = false;
    PseudoBox b;
    for (std::size_t i = 0; i < pose.size(); ++i) {
        if (!pose.labeled(i)) continue;
        const Point& p = pose.keypoints[i];
        if (!any) {
            b = {p.x, p.y, p.x, p.y};
            any = true;
        } else {
            b.x_min = std::min(b.x_min, p.x);
            b.y_min = std::min(b.y_min, p.y);
            b.x_max = std::max(b.x_max, p.x);
            b.y_max = std::max(b.y_max, p.y);
        }
    }
    if (!any) throw NoLabeledKeypoints();
    return b;
}

struct GroundTruthInstance {
    Pose pose;
    double area = -1.0;  // < 0 means unset, fall back to pseudo-box area
    PseudoBox box;
    std::int64_t id = 0;

    bool has_area() const { return area > 0.0; }
};

inline GroundTruthInstance make_instance(Pose pose, std::int64_t id, double area = -1.0) {
    GroundTruthInstance gt;
    gt.box = pseudo_box(pose);
    gt.pose = std::move(pose);
    gt.id = id;
    gt.area = area;
    return gt;
}

struct Detection {
    Pose pose;  // all keypoints labeled visible by convention
    double confidence = 0.0;
    int source_level = 0;
};

}  // namespace posekit
