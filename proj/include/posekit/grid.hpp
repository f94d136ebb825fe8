#pragma once

#include <cmath>
#include <vector>

#include "posekit/error.hpp"
#include "posekit/pose.hpp"

namespace posekit {

constexpr int kMinLevel = 3;
constexpr int kMaxLevel = 7;
constexpr int kNumLevels = kMaxLevel - kMinLevel + 1;

inline double level_stride(int level) {
    if (level < kMinLevel || level > kMaxLevel) throw InvalidLevel(level);
    return static_cast<double>(1 << level);
}

struct GridLocation {
    int level = kMinLevel;
    double stride = 8.0;
    int ix = 0, iy = 0;
    double x_c = 0.0, y_c = 0.0;

    Point center() const { return {x_c, y_c}; }
};

inline GridLocation make_location(int level, int ix, int iy) {
    const double stride = level_stride(level);
    return {level, stride, ix, iy, (ix + 0.5) * stride, (iy + 0.5) * stride};
}

/// Cell-center locations covering the image at one pyramid level, row-major.
inline std::vector<GridLocation> grid_locations(int level, double image_w, double image_h) {
    const double stride = level_stride(level);
    if (image_w < 1.0 || image_h < 1.0) throw InvalidConfig("image dims must be >= 1");
    const int nx = static_cast<int>(std::ceil(image_w / stride));
    const int ny = static_cast<int>(std::ceil(image_h / stride));
    std::vector<GridLocation> locs;
    locs.reserve(static_cast<std::size_t>(nx) * ny);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix)
            locs.push_back(make_location(level, ix, iy));
    return locs;
}

}  // namespace posekit
