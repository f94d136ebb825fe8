#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "posekit/error.hpp"
#include "posekit/oks.hpp"
#include "posekit/pose.hpp"
#include "posekit/skeleton.hpp"

namespace posekit {

enum class NmsMode { hard, soft_linear, soft_gaussian };

enum class ScoreMode { fused, cls_only, gt_oks };

struct NmsConfig {
    double oks_threshold = 0.3;
    NmsMode mode = NmsMode::hard;
    double soft_sigma = 0.5;
    double score_floor = 0.05;
    std::size_t max_detections = 100;

    void validate() const {
        if (oks_threshold < 0.0 || oks_threshold > 1.0)
            throw InvalidConfig("oks_threshold outside [0,1]");
        if (score_floor < 0.0 || score_floor >= 1.0)
            throw InvalidConfig("score_floor outside [0,1)");
    }
};

/// Confidence of a final pose: product of classification and pose scores.
/// cls-only mode ignores the pose score; gt-oks mode substitutes an oracle
/// score supplied by the caller.
inline double fuse_confidence(double cls_score, double pose_score,
                              ScoreMode mode = ScoreMode::fused, double oracle_oks = -1.0) {
    if (cls_score < 0.0 || cls_score > 1.0) throw OutOfRange("cls_score");
    if (pose_score < 0.0 || pose_score > 1.0) throw OutOfRange("pose_score");
    switch (mode) {
        case ScoreMode::cls_only:
            return cls_score;
        case ScoreMode::gt_oks:
            if (oracle_oks < 0.0 || oracle_oks > 1.0) throw OutOfRange("oracle_oks");
            return oracle_oks;
        case ScoreMode::fused:
        default:
            return cls_score * pose_score;
    }
}

struct RankedDetection {
    Detection det;
    std::size_t order = 0;  // level-major, row-major emission index for tie-breaks
};

/// Concatenate per-level lists and stable-sort by confidence descending;
/// equal confidences keep the lower level / earlier index first.
inline std::vector<Detection> merge_levels(const std::vector<std::vector<Detection>>& per_level) {
    std::vector<RankedDetection> all;
    std::size_t order = 0;
    for (const auto& lvl : per_level)
        for (const auto& d : lvl) all.push_back({d, order++});
    std::stable_sort(all.begin(), all.end(), [](const RankedDetection& a, const RankedDetection& b) {
        if (a.det.confidence != b.det.confidence) return a.det.confidence > b.det.confidence;
        return a.order < b.order;
    });
    std::vector<Detection> out;
    out.reserve(all.size());
    for (auto& r : all) out.push_back(std::move(r.det));
    return out;
}

/// Total order on detections making NMS independent of input ordering:
/// confidence descending, then level, then lexicographic pose coordinates.
inline bool detection_before(const Detection& a, const Detection& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.source_level != b.source_level) return a.source_level < b.source_level;
    const std::size_t n = std::min(a.pose.size(), b.pose.size());
    for (std::size_t j = 0; j < n; ++j) {
        if (a.pose.keypoints[j].x != b.pose.keypoints[j].x)
            return a.pose.keypoints[j].x < b.pose.keypoints[j].x;
        if (a.pose.keypoints[j].y != b.pose.keypoints[j].y)
            return a.pose.keypoints[j].y < b.pose.keypoints[j].y;
    }
    return a.pose.size() < b.pose.size();
}

/// Greedy OKS-based pose NMS. Hard mode removes everything with OKS >=
/// threshold against a kept pose; soft modes decay scores and drop below the
/// score floor. The kept (higher-ranked) detection is the GT side of each
/// OKS call.
inline std::vector<Detection> pose_nms(std::vector<Detection> dets, const NmsConfig& cfg,
                                       const SkeletonSpec& spec) {
    cfg.validate();
    std::sort(dets.begin(), dets.end(), detection_before);

    std::vector<Detection> kept;
    std::vector<Detection> pool = std::move(dets);
    while (!pool.empty() && kept.size() < cfg.max_detections) {
        Detection top = std::move(pool.front());
        pool.erase(pool.begin());
        std::vector<Detection> next;
        next.reserve(pool.size());
        for (auto& d : pool) {
            const double oks = detection_oks(d, top, spec);
            switch (cfg.mode) {
                case NmsMode::hard:
                    if (oks < cfg.oks_threshold) next.push_back(std::move(d));
                    break;
                case NmsMode::soft_linear:
                    if (oks >= cfg.oks_threshold) d.confidence *= (1.0 - oks);
                    if (d.confidence >= cfg.score_floor) next.push_back(std::move(d));
                    break;
                case NmsMode::soft_gaussian:
                    d.confidence *= std::exp(-(oks * oks) / cfg.soft_sigma);
                    if (d.confidence >= cfg.score_floor) next.push_back(std::move(d));
                    break;
            }
        }
        // soft decay can reorder the pool
        if (cfg.mode != NmsMode::hard) std::sort(next.begin(), next.end(), detection_before);
        pool = std::move(next);
        kept.push_back(std::move(top));
    }
    std::stable_sort(kept.begin(), kept.end(), [](const Detection& a, const Detection& b) {
        return a.confidence > b.confidence;
    });
    return kept;
}

}  // namespace posekit
