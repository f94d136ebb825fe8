#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "posekit/error.hpp"
#include "posekit/grid.hpp"
#include "posekit/hypothesis.hpp"
#include "posekit/oks.hpp"
#include "posekit/pose.hpp"

namespace posekit {

struct AssignerConfig {
    // side length of the shrunk positive square per level, pixels
    std::array<double, kNumLevels> shrunk_sides = {12.0, 24.0, 48.0, 96.0, 192.0};
    // upper edges of the half-open max-side ranges for levels 3..6;
    // level 7 takes everything above the last edge
    std::array<double, kNumLevels - 1> level_edges = {64.0, 128.0, 256.0, 512.0};
    double refine_oks_threshold = 0.5;
    // full-pseudo-box positives (no shrink), for the baseline ablation row
    bool full_box_positives = false;

    void validate() const {
        double prev = 0.0;
        for (double s : shrunk_sides) {
            if (!(s > prev)) throw InvalidConfig("shrunk_sides must be positive and increasing");
            prev = s;
        }
        prev = 0.0;
        for (double e : level_edges) {
            if (!(e > prev)) throw InvalidConfig("level_edges must be increasing");
            prev = e;
        }
        if (refine_oks_threshold < 0.0 || refine_oks_threshold > 1.0)
            throw InvalidConfig("refine_oks_threshold outside [0,1]");
    }
};

struct Assignment {
    GridLocation location;
    std::optional<std::int64_t> instance_id;
    bool is_initial_positive = false;
    bool is_refine_positive = false;
    std::optional<double> psm_target;
};

/// Level chosen by which range contains max(box width, box height).
inline int level_for_max_side(double max_side, const AssignerConfig& cfg) {
    for (std::size_t i = 0; i < cfg.level_edges.size(); ++i)
        if (max_side < cfg.level_edges[i]) return kMinLevel + static_cast<int>(i);
    return kMaxLevel;
}

inline std::map<int, std::vector<std::int64_t>> assign_levels(
    const std::vector<GroundTruthInstance>& instances, const AssignerConfig& cfg) {
    std::map<int, std::vector<std::int64_t>> out;
    for (const auto& gt : instances)
        out[level_for_max_side(gt.box.max_side(), cfg)].push_back(gt.id);
    return out;
}

/// Smallest containing pseudo-box wins; ties break toward the lowest id.
inline std::optional<std::int64_t> assign_location_to_instance(
    const GridLocation& loc, const std::vector<GroundTruthInstance>& level_instances) {
    std::optional<std::int64_t> best;
    double best_area = std::numeric_limits<double>::infinity();
    for (const auto& gt : level_instances) {
        if (!gt.box.contains(loc.x_c, loc.y_c)) continue;
        const double area = gt.box.area();
        if (area < best_area || (area == best_area && (!best || gt.id < *best))) {
            best = gt.id;
            best_area = area;
        }
    }
    return best;
}

/// A location is an initial positive for its assigned instance iff its center
/// lies inside the level's shrunk square around the pseudo-box center,
/// intersected with the pseudo-box itself.
inline bool is_initial_positive(const GridLocation& loc, const GroundTruthInstance& gt,
                                const AssignerConfig& cfg) {
    if (!gt.box.contains(loc.x_c, loc.y_c)) return false;
    if (cfg.full_box_positives) return true;
    const double half = 0.5 * cfg.shrunk_sides[loc.level - kMinLevel];
    const Point c = gt.box.center();
    return std::abs(loc.x_c - c.x) <= half && std::abs(loc.y_c - c.y) <= half;
}

struct PositivePair {
    GridLocation location;
    std::int64_t instance_id;
};

inline std::vector<PositivePair> initial_positives(
    const std::vector<GridLocation>& locs, const std::vector<GroundTruthInstance>& instances,
    const AssignerConfig& cfg) {
    // group instances by level once
    std::array<std::vector<GroundTruthInstance>, kNumLevels> per_level;
    for (const auto& gt : instances)
        per_level[level_for_max_side(gt.box.max_side(), cfg) - kMinLevel].push_back(gt);

    std::vector<PositivePair> out;
    for (const auto& loc : locs) {
        const auto& cands = per_level[loc.level - kMinLevel];
        auto id = assign_location_to_instance(loc, cands);
        if (!id) continue;
        for (const auto& gt : cands) {
            if (gt.id != *id) continue;
            if (is_initial_positive(loc, gt, cfg)) out.push_back({loc, *id});
            break;
        }
    }
    return out;
}

struct AssignedHypothesis {
    PoseHypothesis hypothesis;
    std::optional<std::int64_t> instance_id;
};

inline const GroundTruthInstance* find_instance(
    const std::vector<GroundTruthInstance>& instances, std::int64_t id) {
    for (const auto& gt : instances)
        if (gt.id == id) return &gt;
    return nullptr;
}

/// Refinement positives: assigned hypotheses whose refined decode reaches the
/// OKS threshold against their instance.
inline std::vector<std::size_t> refinement_positives(
    const std::vector<AssignedHypothesis>& hyps,
    const std::vector<GroundTruthInstance>& instances, const AssignerConfig& cfg,
    const SkeletonSpec& spec) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        if (!hyps[i].instance_id) continue;
        const GroundTruthInstance* gt = find_instance(instances, *hyps[i].instance_id);
        if (!gt) throw InvalidConfig("assignment references unknown instance id");
        const double oks = compute_oks(decode_refined(hyps[i].hypothesis), gt->pose,
                                       OksScale::from_instance(*gt), spec);
        if (oks >= cfg.refine_oks_threshold) out.push_back(i);
    }
    return out;
}

/// PSM target: OKS of the refined decode for assigned locations, 0 for background.
inline std::vector<double> psm_targets(const std::vector<AssignedHypothesis>& hyps,
                                       const std::vector<GroundTruthInstance>& instances,
                                       const SkeletonSpec& spec) {
    std::vector<double> out;
    out.reserve(hyps.size());
    for (const auto& h : hyps) {
        if (!h.instance_id) {
            out.push_back(0.0);
            continue;
        }
        const GroundTruthInstance* gt = find_instance(instances, *h.instance_id);
        if (!gt) throw InvalidConfig("assignment references unknown instance id");
        out.push_back(compute_oks(decode_refined(h.hypothesis), gt->pose,
                                  OksScale::from_instance(*gt), spec));
    }
    return out;
}

}  // namespace posekit
