#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "posekit/assign.hpp"
#include "posekit/error.hpp"
#include "posekit/grid.hpp"
#include "posekit/pose.hpp"

namespace posekit {

constexpr double kProbEps = 1e-6;

struct LossWeights {
    double cls = 1.0;
    double heatmap = 4.0;
    double reg_initial = 0.05;
    double reg_refined = 0.1;
    double score = 1.0;

    void validate() const {
        for (double w : {cls, heatmap, reg_initial, reg_refined, score})
            if (w < 0.0) throw InvalidConfig("loss weights must be >= 0");
    }
};

struct FocalParams {
    double alpha = 0.25;
    double gamma = 2.0;
    double heatmap_beta = 4.0;

    void validate() const {
        if (alpha <= 0.0 || alpha >= 1.0) throw InvalidConfig("focal alpha outside (0,1)");
        if (gamma < 0.0 || heatmap_beta < 0.0) throw InvalidConfig("focal exponents must be >= 0");
    }
};

inline double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

/// Binary focal loss over a flat grid, summed and normalized by the number of
/// positive targets (minimum 1).
inline double focal_loss(const std::vector<double>& pred_probs, const std::vector<int>& targets,
                         const FocalParams& params = {}) {
    if (pred_probs.size() != targets.size()) throw ShapeMismatch("focal pred vs targets");
    double sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < pred_probs.size(); ++i) {
        const double p = clamp_prob(pred_probs[i]);
        if (targets[i] == 1) {
            sum += -params.alpha * std::pow(1.0 - p, params.gamma) * std::log(p);
            ++positives;
        } else {
            sum += -(1.0 - params.alpha) * std::pow(p, params.gamma) * std::log(1.0 - p);
        }
    }
    return sum / static_cast<double>(std::max<std::size_t>(positives, 1));
}

/// One stride-8 channel per keypoint type, values in [0,1].
struct HeatmapTarget {
    int width = 0, height = 0;
    std::size_t channels = 0;
    std::vector<double> values;  // channel-major, row-major within a channel

    double& at(std::size_t c, int gx, int gy) {
        return values[(c * height + gy) * width + gx];
    }
    double at(std::size_t c, int gx, int gy) const {
        return values[(c * height + gy) * width + gx];
    }
};

/// Gaussian target maps at the stride-8 grid, max-combined over instances,
/// with an exact 1 written at each labeled keypoint's nearest cell.
inline HeatmapTarget gaussian_heatmap_targets(const std::vector<GroundTruthInstance>& instances,
                                              double image_w, double image_h, std::size_t k,
                                              double sigma = 2.0) {
    const double stride = level_stride(kMinLevel);
    HeatmapTarget t;
    t.width = static_cast<int>(std::ceil(image_w / stride));
    t.height = static_cast<int>(std::ceil(image_h / stride));
    t.channels = k;
    t.values.assign(t.channels * t.height * t.width, 0.0);

    for (const auto& gt : instances) {
        for (std::size_t c = 0; c < k && c < gt.pose.size(); ++c) {
            if (!gt.pose.labeled(c)) continue;
            // cell-center convention: a keypoint at (ix+0.5)*stride maps to ix
            const double kx = gt.pose.keypoints[c].x / stride - 0.5;
            const double ky = gt.pose.keypoints[c].y / stride - 0.5;
            for (int gy = 0; gy < t.height; ++gy) {
                for (int gx = 0; gx < t.width; ++gx) {
                    const double d2 = (gx - kx) * (gx - kx) + (gy - ky) * (gy - ky);
                    const double v = std::exp(-d2 / (2.0 * sigma * sigma));
                    double& cell = t.at(c, gx, gy);
                    cell = std::max(cell, v);
                }
            }
            const int px = std::clamp(static_cast<int>(std::lround(kx)), 0, t.width - 1);
            const int py = std::clamp(static_cast<int>(std::lround(ky)), 0, t.height - 1);
            t.at(c, px, py) = 1.0;
        }
    }
    return t;
}

/// Penalty-reduced focal loss on Gaussian heatmaps: peak cells (target = 1)
/// take the positive term, all other cells are down-weighted by (1-target)^beta.
inline double heatmap_loss(const HeatmapTarget& pred, const HeatmapTarget& target,
                           const FocalParams& params = {}) {
    if (pred.values.size() != target.values.size() || pred.width != target.width ||
        pred.height != target.height || pred.channels != target.channels)
        throw ShapeMismatch("heatmap pred vs target");
    double sum = 0.0;
    std::size_t peaks = 0;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        const double p = clamp_prob(pred.values[i]);
        const double t = target.values[i];
        if (t == 1.0) {
            sum += -std::pow(1.0 - p, params.gamma) * std::log(p);
            ++peaks;
        } else {
            sum += -std::pow(1.0 - t, params.heatmap_beta) * std::pow(p, params.gamma) *
                   std::log(1.0 - p);
        }
    }
    return sum / static_cast<double>(std::max<std::size_t>(peaks, 1));
}

enum class RegressionStage { initial, refined };

struct RegressionLoss {
    double value = 0.0;
    bool empty_positive_set = false;
};

/// Mean absolute error on stride-normalized offsets over the positive
/// hypotheses, labeled GT keypoints only.
inline RegressionLoss l1_regression_loss(const std::vector<AssignedHypothesis>& hyps,
                                         const std::vector<std::size_t>& positive_indices,
                                         const std::vector<GroundTruthInstance>& instances,
                                         RegressionStage stage) {
    double sum = 0.0;
    std::size_t terms = 0;
    for (std::size_t idx : positive_indices) {
        const auto& h = hyps[idx];
        if (!h.instance_id) continue;
        const GroundTruthInstance* gt = find_instance(instances, *h.instance_id);
        if (!gt) throw InvalidConfig("positive references unknown instance id");
        const Pose decoded = stage == RegressionStage::initial ? decode_initial(h.hypothesis)
                                                               : decode_refined(h.hypothesis);
        const double stride = h.hypothesis.location.stride;
        for (std::size_t j = 0; j < gt->pose.size(); ++j) {
            if (!gt->pose.labeled(j)) continue;
            sum += std::abs(decoded.keypoints[j].x - gt->pose.keypoints[j].x) / stride;
            sum += std::abs(decoded.keypoints[j].y - gt->pose.keypoints[j].y) / stride;
            terms += 2;
        }
    }
    if (terms == 0) return {0.0, true};
    return {sum / static_cast<double>(terms), false};
}

/// Mean binary cross entropy over supervised locations.
inline double bce_score_loss(const std::vector<double>& pred_scores,
                             const std::vector<double>& targets) {
    if (pred_scores.size() != targets.size()) throw ShapeMismatch("bce pred vs targets");
    if (pred_scores.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < pred_scores.size(); ++i) {
        const double p = clamp_prob(pred_scores[i]);
        const double t = targets[i];
        sum += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    }
    return sum / static_cast<double>(pred_scores.size());
}

struct LossComponents {
    double cls = 0.0;
    double heatmap = 0.0;
    double reg_initial = 0.0;
    double reg_refined = 0.0;
    double score = 0.0;
};

inline double total_loss(const LossComponents& c, const LossWeights& w = {}) {
    return w.cls * c.cls + w.heatmap * c.heatmap + w.reg_initial * c.reg_initial +
           w.reg_refined * c.reg_refined + w.score * c.score;
}

}  // namespace posekit
