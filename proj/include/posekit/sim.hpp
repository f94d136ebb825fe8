#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "posekit/assign.hpp"
#include "posekit/coco_eval.hpp"
#include "posekit/error.hpp"
#include "posekit/grid.hpp"
#include "posekit/hypothesis.hpp"
#include "posekit/oks.hpp"
#include "posekit/pose.hpp"
#include "posekit/postprocess.hpp"
#include "posekit/rng.hpp"
#include "posekit/skeleton.hpp"

namespace posekit {

// ---------------------------------------------------------------------------
// scene generation

struct SceneConfig {
    double image_w = 512.0;
    double image_h = 512.0;
    int min_instances = 1;
    int max_instances = 4;
    double min_scale = 80.0;   // person height range, pixels
    double max_scale = 280.0;
    double pose_jitter = 0.04;  // keypoint jitter relative to person height
    double max_overlap_oks = 0.2;

    void validate() const {
        if (image_w < 32.0 || image_h < 32.0) throw InvalidConfig("image dims too small");
        if (min_instances < 0 || max_instances < min_instances)
            throw InvalidConfig("bad instance count range");
        if (!(min_scale > 0.0) || max_scale < min_scale) throw InvalidConfig("bad scale range");
        if (max_scale > 0.9 * std::min(image_w, image_h))
            throw InvalidConfig("max_scale too large for image");
        if (pose_jitter < 0.0) throw InvalidConfig("pose_jitter must be >= 0");
    }
};

struct SimScene {
    double image_w = 0.0, image_h = 0.0;
    std::vector<GroundTruthInstance> instances;
};

// canonical standing-person template, 17 keypoints in unit height coordinates
inline const std::array<Point, 17>& person_template() {
    static const std::array<Point, 17> t = {{{0.50, 0.05},
                                             {0.47, 0.03},
                                             {0.53, 0.03},
                                             {0.44, 0.05},
                                             {0.56, 0.05},
                                             {0.38, 0.20},
                                             {0.62, 0.20},
                                             {0.33, 0.35},
                                             {0.67, 0.35},
                                             {0.30, 0.50},
                                             {0.70, 0.50},
                                             {0.42, 0.52},
                                             {0.58, 0.52},
                                             {0.41, 0.75},
                                             {0.59, 0.75},
                                             {0.40, 0.97},
                                             {0.60, 0.97}}};
    return t;
}

inline SimScene generate_scene(std::uint64_t seed, const SceneConfig& cfg,
                               const SkeletonSpec& spec) {
    cfg.validate();
    if (spec.k != 17) throw InvalidConfig("scene generator requires the 17-keypoint skeleton");
    Rng rng = Rng::stream(seed, 0);
    SimScene scene;
    scene.image_w = cfg.image_w;
    scene.image_h = cfg.image_h;
    const int n = cfg.min_instances +
                  static_cast<int>(rng.uniform_index(
                      static_cast<std::uint64_t>(cfg.max_instances - cfg.min_instances + 1)));
    const auto& tmpl = person_template();
    for (int i = 0; i < n; ++i) {
        for (int attempt = 0; attempt < 64; ++attempt) {
            const double h = rng.uniform(cfg.min_scale, cfg.max_scale);
            const double margin_x = 0.35 * h;
            const double margin_y = 0.55 * h;
            const double cx = rng.uniform(margin_x, cfg.image_w - margin_x);
            const double cy = rng.uniform(margin_y, cfg.image_h - margin_y);
            Pose pose;
            pose.visibility.assign(17, 2);
            pose.keypoints.reserve(17);
            for (const Point& t : tmpl) {
                const double jx = cfg.pose_jitter * h * rng.normal();
                const double jy = cfg.pose_jitter * h * rng.normal();
                pose.keypoints.push_back(
                    {cx + (t.x - 0.5) * 0.5 * h + jx, cy + (t.y - 0.5) * h + jy});
            }
            bool in_bounds = true;
            for (const Point& p : pose.keypoints)
                if (p.x < 0.0 || p.y < 0.0 || p.x > cfg.image_w || p.y > cfg.image_h)
                    in_bounds = false;
            if (!in_bounds) continue;
            // keep instances separable so a perfect pipeline reaches AP 1
            bool overlaps = false;
            for (const auto& other : scene.instances) {
                const double o =
                    compute_oks(pose, other.pose, OksScale::from_instance(other), spec);
                if (o >= cfg.max_overlap_oks) overlaps = true;
            }
            if (overlaps) continue;
            GroundTruthInstance gt = make_instance(std::move(pose), i);
            gt.area = gt.box.area();
            scene.instances.push_back(std::move(gt));
            break;
        }
    }
    return scene;
}

// ---------------------------------------------------------------------------
// prediction simulation

struct NoiseModel {
    double base_sigma = 2.0;     // keypoint offset noise at the instance center, px
    double center_slope = 10.0;  // extra sigma per unit center-distance / scale
    double refine_gain = 0.85;   // residual fraction recovered by refinement
    double cls_noise = 0.15;     // std of classification score perturbation
    double score_corr = 0.25;    // mixing between true OKS and noise in cls score
    double psm_noise = 0.05;     // std of pose-score perturbation
    double refine_gate_oks = 0.2;  // initial quality needed for refinement to latch on

    void validate() const {
        for (double v : {base_sigma, center_slope, cls_noise, psm_noise})
            if (v < 0.0) throw InvalidConfig("noise parameters must be >= 0");
        if (refine_gain < 0.0 || refine_gain > 1.0) throw InvalidConfig("refine_gain outside [0,1]");
        if (score_corr < 0.0 || score_corr > 1.0) throw InvalidConfig("score_corr outside [0,1]");
    }

    static NoiseModel noiseless() {
        NoiseModel m;
        m.base_sigma = 0.0;
        m.center_slope = 0.0;
        m.refine_gain = 1.0;
        m.cls_noise = 0.0;
        m.score_corr = 1.0;
        m.psm_noise = 0.0;
        return m;
    }
};

inline double location_noise_sigma(const GridLocation& loc, const GroundTruthInstance& gt,
                                   const NoiseModel& noise) {
    const Point c = gt.box.center();
    const double dist = std::hypot(loc.x_c - c.x, loc.y_c - c.y);
    const double scale = std::max(std::sqrt(std::max(gt.box.area(), 1.0)), 1.0);
    return noise.base_sigma + noise.center_slope * dist / scale;
}

struct ScorePair {
    double cls = 0.0;
    double pose = 0.0;
};

/// cls mixes true quality with uniform noise through score_corr; the pose
/// score tracks quality closely, modeling a learned quality head.
inline ScorePair synthesize_scores(double true_oks, const NoiseModel& noise, Rng& rng) {
    const double u = rng.uniform();
    const double g = rng.normal();
    ScorePair s;
    s.cls = std::clamp(noise.score_corr * true_oks + (1.0 - noise.score_corr) * u +
                           noise.cls_noise * g,
                       0.0, 1.0);
    s.pose = std::clamp(true_oks + noise.psm_noise * rng.normal(), 0.0, 1.0);
    return s;
}

struct SimHypothesis {
    PoseHypothesis hyp;
    std::optional<std::int64_t> instance_id;
    double oracle_oks = 0.0;  // refined-decode OKS against the best-matching GT
};

struct SimPredictions {
    std::array<std::vector<SimHypothesis>, kNumLevels> levels;
};

inline SimPredictions simulate_predictions(const SimScene& scene, const NoiseModel& noise,
                                           std::uint64_t seed, const SkeletonSpec& spec,
                                           const AssignerConfig& acfg = {}) {
    noise.validate();
    Rng rng = Rng::stream(seed, 1);
    std::array<std::vector<GroundTruthInstance>, kNumLevels> per_level;
    for (const auto& gt : scene.instances)
        per_level[level_for_max_side(gt.box.max_side(), acfg) - kMinLevel].push_back(gt);

    SimPredictions out;
    for (int level = kMinLevel; level <= kMaxLevel; ++level) {
        const int li = level - kMinLevel;
        for (const GridLocation& loc : grid_locations(level, scene.image_w, scene.image_h)) {
            SimHypothesis sh;
            sh.hyp.location = loc;
            sh.hyp.offsets1.resize(spec.k);
            sh.hyp.offsets2.resize(spec.k);
            sh.instance_id = assign_location_to_instance(loc, per_level[li]);
            if (sh.instance_id) {
                const GroundTruthInstance* gt = find_instance(scene.instances, *sh.instance_id);
                const double sigma = location_noise_sigma(loc, *gt, noise);
                for (std::size_t j = 0; j < spec.k; ++j) {
                    sh.hyp.offsets1[j] = {
                        gt->pose.keypoints[j].x - loc.x_c + sigma * rng.normal(),
                        gt->pose.keypoints[j].y - loc.y_c + sigma * rng.normal()};
                }
                const Pose initial = decode_initial(sh.hyp);
                const double oks_init =
                    compute_oks(initial, gt->pose, OksScale::from_instance(*gt), spec);
                if (oks_init >= noise.refine_gate_oks) {
                    for (std::size_t j = 0; j < spec.k; ++j) {
                        sh.hyp.offsets2[j] = {
                            noise.refine_gain * (gt->pose.keypoints[j].x - initial.keypoints[j].x),
                            noise.refine_gain * (gt->pose.keypoints[j].y - initial.keypoints[j].y)};
                    }
                } else {
                    const double s2 = 0.5 * std::max(noise.base_sigma, 1.0);
                    for (std::size_t j = 0; j < spec.k; ++j)
                        sh.hyp.offsets2[j] = {s2 * rng.normal(), s2 * rng.normal()};
                }
                sh.oracle_oks = compute_oks(decode_refined(sh.hyp), gt->pose,
                                            OksScale::from_instance(*gt), spec);
                const ScorePair sc = synthesize_scores(sh.oracle_oks, noise, rng);
                sh.hyp.cls_score = sc.cls;
                sh.hyp.pose_score = sc.pose;
            } else {
                // background: junk offsets, low scores
                for (std::size_t j = 0; j < spec.k; ++j) {
                    sh.hyp.offsets1[j] = {loc.stride * rng.normal(), loc.stride * rng.normal()};
                    sh.hyp.offsets2[j] = {0.0, 0.0};
                }
                sh.hyp.cls_score = std::clamp(2.0 * noise.cls_noise * std::abs(rng.normal()), 0.0, 1.0);
                sh.hyp.pose_score = std::clamp(noise.psm_noise * std::abs(rng.normal()), 0.0, 1.0);
                double best = 0.0;
                if (!scene.instances.empty()) {
                    const Pose refined = decode_refined(sh.hyp);
                    for (const auto& gt : scene.instances)
                        best = std::max(best, compute_oks(refined, gt.pose,
                                                          OksScale::from_instance(gt), spec));
                }
                sh.oracle_oks = best;
            }
            out.levels[li].push_back(std::move(sh));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// pipeline: predictions -> detections -> NMS -> evaluation

constexpr std::size_t kPreNmsTopK = 300;

inline std::vector<Detection> detections_from_predictions(const SimPredictions& preds,
                                                          ScoreMode score_mode,
                                                          const NmsConfig& nms_cfg,
                                                          const SkeletonSpec& spec) {
    std::vector<std::vector<Detection>> per_level(kNumLevels);
    for (int li = 0; li < kNumLevels; ++li) {
        for (const auto& sh : preds.levels[li]) {
            const double conf = fuse_confidence(sh.hyp.cls_score, sh.hyp.pose_score, score_mode,
                                                sh.oracle_oks);
            if (conf < nms_cfg.score_floor) continue;
            Detection d;
            d.pose = decode_refined(sh.hyp);
            d.confidence = conf;
            d.source_level = kMinLevel + li;
            per_level[li].push_back(std::move(d));
        }
    }
    std::vector<Detection> merged = merge_levels(per_level);
    if (merged.size() > kPreNmsTopK) {
        std::sort(merged.begin(), merged.end(), detection_before);
        merged.resize(kPreNmsTopK);
    }
    return pose_nms(std::move(merged), nms_cfg, spec);
}

inline void append_scene_gt(GtDataset& ds, const SimScene& scene, std::int64_t image_id,
                            std::int64_t& next_ann_id) {
    ds.images.push_back({image_id, scene.image_w, scene.image_h});
    for (const auto& gt : scene.instances) {
        GtAnnotation a;
        a.id = next_ann_id++;
        a.image_id = image_id;
        a.area = gt.has_area() ? gt.area : gt.box.area();
        a.keypoints.reserve(3 * gt.pose.size());
        for (std::size_t j = 0; j < gt.pose.size(); ++j) {
            a.keypoints.push_back(gt.pose.keypoints[j].x);
            a.keypoints.push_back(gt.pose.keypoints[j].y);
            a.keypoints.push_back(static_cast<double>(gt.pose.visibility[j]));
        }
        ds.annotations.push_back(std::move(a));
    }
}

inline void append_detections(ResultSet& rs, const std::vector<Detection>& dets,
                              std::int64_t image_id) {
    for (const auto& d : dets) {
        ResultEntry r;
        r.image_id = image_id;
        r.score = d.confidence;
        r.keypoints.reserve(3 * d.pose.size());
        for (std::size_t j = 0; j < d.pose.size(); ++j) {
            r.keypoints.push_back(d.pose.keypoints[j].x);
            r.keypoints.push_back(d.pose.keypoints[j].y);
            r.keypoints.push_back(2.0);
        }
        rs.results.push_back(std::move(r));
    }
}

// deterministic parallel map: results land in index order regardless of jobs
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    std::size_t per = (n + jobs - 1) / jobs;
    for (unsigned w = 0; w < jobs; ++w) {
        const std::size_t lo = w * per, hi = std::min(n, lo + per);
        if (lo >= hi) break;
        workers.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : workers) t.join();
}

// ---------------------------------------------------------------------------
// scoring experiment (score-mode comparison over full pipeline runs)

struct ScoringExperimentResult {
    EvalResult cls_only;
    EvalResult fused;
    EvalResult gt_oks;
};

inline ScoringExperimentResult run_scoring_experiment(const SceneConfig& scfg,
                                                      const NoiseModel& noise,
                                                      std::uint64_t seed, std::size_t n_scenes,
                                                      const SkeletonSpec& spec,
                                                      const NmsConfig& nms_cfg = {},
                                                      unsigned jobs = 1) {
    struct PerScene {
        SimScene scene;
        std::array<std::vector<Detection>, 3> dets;
    };
    const ScoreMode modes[3] = {ScoreMode::cls_only, ScoreMode::fused, ScoreMode::gt_oks};
    std::vector<PerScene> per_scene(n_scenes);
    parallel_for(n_scenes, jobs, [&](std::size_t i) {
        const std::uint64_t scene_seed = seed * 1000003ULL + i;
        PerScene ps;
        ps.scene = generate_scene(scene_seed, scfg, spec);
        const SimPredictions preds = simulate_predictions(ps.scene, noise, scene_seed, spec);
        for (int m = 0; m < 3; ++m)
            ps.dets[m] = detections_from_predictions(preds, modes[m], nms_cfg, spec);
        per_scene[i] = std::move(ps);
    });

    ScoringExperimentResult out;
    EvalResult* slots[3] = {&out.cls_only, &out.fused, &out.gt_oks};
    for (int m = 0; m < 3; ++m) {
        GtDataset gt;
        ResultSet rs;
        std::int64_t ann_id = 1;
        for (std::size_t i = 0; i < n_scenes; ++i) {
            const std::int64_t image_id = static_cast<std::int64_t>(i) + 1;
            append_scene_gt(gt, per_scene[i].scene, image_id, ann_id);
            append_detections(rs, per_scene[i].dets[m], image_id);
        }
        *slots[m] = evaluate(gt, rs, spec);
    }
    return out;
}

// ---------------------------------------------------------------------------
// toy trainer

enum class RefineRule { none, all_assigned, oks_threshold };

struct StrategyConfig {
    std::string name = "default";
    bool shrunk_positives = true;  // positive_rule: shrunk-box vs full-box
    RefineRule refine_rule = RefineRule::oks_threshold;
    double refine_threshold = 0.5;
    ScoreMode score_mode = ScoreMode::fused;

    void validate() const {
        if (refine_threshold < 0.0 || refine_threshold > 1.0)
            throw InvalidConfig("refine_threshold outside [0,1]");
    }
};

struct TrainerConfig {
    std::size_t train_scenes = 8;
    std::size_t heldout_scenes = 4;
    int iterations = 300;
    double learning_rate = 0.5;
    double refine_feature_sigma = 0.15;  // stride-normalized stage-2 feature noise scale
    double min_quality = 0.05;           // quality floor in the stage-2 noise law
};

/// Per-level diagonal linear map on stride-normalized offset features.
struct ToyPredictor {
    std::array<std::vector<double>, kNumLevels> gain1, bias1;
    std::array<std::vector<double>, kNumLevels> gain2, bias2;
    double train_loss = 0.0;
    bool has_refine = false;
};

namespace detail {

struct LadFit {
    double a = 0.0, b = 0.0, loss = 0.0;
};

// scalar least-absolute-deviation fit y ~ a*x + b: least-squares start, then
// subgradient descent with halving steps on non-improvement
inline LadFit fit_lad(const std::vector<double>& x, const std::vector<double>& y, int iterations,
                      double lr) {
    const std::size_t n = x.size();
    auto loss_at = [&](double a, double b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += std::abs(y[i] - a * x[i] - b);
        return s / static_cast<double>(n);
    };
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    double a = sxx > 1e-12 ? sxy / sxx : 0.0;
    double b = my - a * mx;
    double best_a = a, best_b = b, best = loss_at(a, b);
    double step = lr;
    for (int it = 0; it < iterations; ++it) {
        double ga = 0.0, gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - best_a * x[i] - best_b;
            const double s = (r > 0.0) - (r < 0.0);
            ga += -s * x[i];
            gb += -s;
        }
        ga /= static_cast<double>(n);
        gb /= static_cast<double>(n);
        const double norm = std::hypot(ga, gb);
        if (norm < 1e-12) break;
        const double na = best_a - step * ga / norm;
        const double nb = best_b - step * gb / norm;
        const double l = loss_at(na, nb);
        if (l < best) {
            best = l;
            best_a = na;
            best_b = nb;
        } else {
            step *= 0.5;
            if (step < 1e-10) break;
        }
    }
    return {best_a, best_b, best};
}

struct StageSamples {
    // per level, per coordinate (2K): parallel feature/target arrays
    std::array<std::vector<std::vector<double>>, kNumLevels> feat, target;
    std::size_t count = 0;
};

}  // namespace detail

struct TrainedModel {
    ToyPredictor predictor;
    std::size_t stage1_samples = 0;
    std::size_t stage2_samples = 0;
};

inline TrainedModel toy_train(const std::vector<SimScene>& scenes, const StrategyConfig& strategy,
                              const TrainerConfig& tcfg, const NoiseModel& noise,
                              const SkeletonSpec& spec, std::uint64_t seed,
                              const AssignerConfig& base_acfg = {}) {
    if (scenes.empty()) throw InvalidConfig("toy_train needs at least one scene");
    strategy.validate();
    const std::size_t dims = 2 * spec.k;
    AssignerConfig acfg = base_acfg;
    acfg.full_box_positives = !strategy.shrunk_positives;

    detail::StageSamples s1, s2;
    for (auto& v : s1.feat) v.resize(dims);
    for (auto& v : s1.target) v.resize(dims);
    for (auto& v : s2.feat) v.resize(dims);
    for (auto& v : s2.target) v.resize(dims);

    Rng rng = Rng::stream(seed, 2);
    for (const SimScene& scene : scenes) {
        std::array<std::vector<GroundTruthInstance>, kNumLevels> per_level;
        for (const auto& gt : scene.instances)
            per_level[level_for_max_side(gt.box.max_side(), acfg) - kMinLevel].push_back(gt);
        for (int level = kMinLevel; level <= kMaxLevel; ++level) {
            const int li = level - kMinLevel;
            const double stride = level_stride(level);
            for (const GridLocation& loc :
                 grid_locations(level, scene.image_w, scene.image_h)) {
                auto id = assign_location_to_instance(loc, per_level[li]);
                if (!id) continue;
                const GroundTruthInstance* gt = find_instance(scene.instances, *id);
                if (!is_initial_positive(loc, *gt, acfg)) continue;
                const double sigma = location_noise_sigma(loc, *gt, noise) / stride;
                // stage-1 feature: noisy view of the true stride-normalized offsets
                std::vector<double> truth(dims), feat(dims);
                for (std::size_t j = 0; j < spec.k; ++j) {
                    truth[2 * j] = (gt->pose.keypoints[j].x - loc.x_c) / stride;
                    truth[2 * j + 1] = (gt->pose.keypoints[j].y - loc.y_c) / stride;
                }
                for (std::size_t c = 0; c < dims; ++c)
                    feat[c] = truth[c] + sigma * rng.normal();
                for (std::size_t c = 0; c < dims; ++c) {
                    s1.feat[li][c].push_back(feat[c]);
                    s1.target[li][c].push_back(truth[c]);
                }
                ++s1.count;
                if (strategy.refine_rule == RefineRule::none) continue;
                // stage-2 sample gated on the quality of the raw initial decode
                PoseHypothesis h;
                h.location = loc;
                h.offsets1.resize(spec.k);
                h.offsets2.assign(spec.k, {0.0, 0.0});
                for (std::size_t j = 0; j < spec.k; ++j)
                    h.offsets1[j] = {feat[2 * j] * stride, feat[2 * j + 1] * stride};
                const double oks_init = compute_oks(decode_initial(h), gt->pose,
                                                    OksScale::from_instance(*gt), spec);
                if (strategy.refine_rule == RefineRule::oks_threshold &&
                    oks_init < strategy.refine_threshold)
                    continue;
                const double s2sigma = tcfg.refine_feature_sigma /
                                       std::max(oks_init, tcfg.min_quality);
                for (std::size_t c = 0; c < dims; ++c) {
                    const double residual = truth[c] - feat[c];
                    s2.feat[li][c].push_back(residual + s2sigma * rng.normal());
                    s2.target[li][c].push_back(residual);
                }
                ++s2.count;
            }
        }
    }
    if (s1.count == 0) throw NoPositives();

    TrainedModel out;
    out.stage1_samples = s1.count;
    out.stage2_samples = s2.count;
    out.predictor.has_refine = strategy.refine_rule != RefineRule::none;
    double loss_sum = 0.0;
    std::size_t loss_terms = 0;
    for (int li = 0; li < kNumLevels; ++li) {
        out.predictor.gain1[li].assign(dims, 1.0);
        out.predictor.bias1[li].assign(dims, 0.0);
        // refinement defaults to a no-op for coordinates with no training signal
        out.predictor.gain2[li].assign(dims, 0.0);
        out.predictor.bias2[li].assign(dims, 0.0);
        for (std::size_t c = 0; c < dims; ++c) {
            if (!s1.feat[li][c].empty()) {
                const auto fit = detail::fit_lad(s1.feat[li][c], s1.target[li][c],
                                                 tcfg.iterations, tcfg.learning_rate);
                out.predictor.gain1[li][c] = fit.a;
                out.predictor.bias1[li][c] = fit.b;
                loss_sum += fit.loss;
                ++loss_terms;
            }
            if (out.predictor.has_refine && !s2.feat[li][c].empty()) {
                const auto fit = detail::fit_lad(s2.feat[li][c], s2.target[li][c],
                                                 tcfg.iterations, tcfg.learning_rate);
                out.predictor.gain2[li][c] = fit.a;
                out.predictor.bias2[li][c] = fit.b;
            }
        }
    }
    out.predictor.train_loss = loss_terms ? loss_sum / static_cast<double>(loss_terms) : 0.0;
    return out;
}

/// Run the trained predictor over a held-out scene and emit NMS survivors.
inline std::vector<Detection> predict_scene(const SimScene& scene, const ToyPredictor& model,
                                            const StrategyConfig& strategy,
                                            const TrainerConfig& tcfg, const NoiseModel& noise,
                                            const SkeletonSpec& spec, std::uint64_t seed,
                                            const NmsConfig& nms_cfg = {},
                                            const AssignerConfig& base_acfg = {}) {
    // only locations the strategy supervised emit poses at inference
    AssignerConfig acfg = base_acfg;
    acfg.full_box_positives = !strategy.shrunk_positives;
    Rng rng = Rng::stream(seed, 3);
    const std::size_t dims = 2 * spec.k;

    std::array<std::vector<GroundTruthInstance>, kNumLevels> per_level;
    for (const auto& gt : scene.instances)
        per_level[level_for_max_side(gt.box.max_side(), acfg) - kMinLevel].push_back(gt);

    std::vector<std::vector<Detection>> dets_per_level(kNumLevels);
    for (int level = kMinLevel; level <= kMaxLevel; ++level) {
        const int li = level - kMinLevel;
        const double stride = level_stride(level);
        for (const GridLocation& loc : grid_locations(level, scene.image_w, scene.image_h)) {
            auto id = assign_location_to_instance(loc, per_level[li]);
            if (!id) continue;
            const GroundTruthInstance* gt = find_instance(scene.instances, *id);
            if (!is_initial_positive(loc, *gt, acfg)) continue;
            const double sigma = location_noise_sigma(loc, *gt, noise) / stride;
            std::vector<double> truth(dims), feat(dims);
            for (std::size_t j = 0; j < spec.k; ++j) {
                truth[2 * j] = (gt->pose.keypoints[j].x - loc.x_c) / stride;
                truth[2 * j + 1] = (gt->pose.keypoints[j].y - loc.y_c) / stride;
            }
            for (std::size_t c = 0; c < dims; ++c) feat[c] = truth[c] + sigma * rng.normal();

            PoseHypothesis h;
            h.location = loc;
            h.offsets1.resize(spec.k);
            h.offsets2.assign(spec.k, {0.0, 0.0});
            for (std::size_t j = 0; j < spec.k; ++j) {
                h.offsets1[j] = {
                    (model.gain1[li][2 * j] * feat[2 * j] + model.bias1[li][2 * j]) * stride,
                    (model.gain1[li][2 * j + 1] * feat[2 * j + 1] + model.bias1[li][2 * j + 1]) *
                        stride};
            }
            const Pose initial = decode_initial(h);
            const double oks_init =
                compute_oks(initial, gt->pose, OksScale::from_instance(*gt), spec);
            if (model.has_refine) {
                const double s2sigma =
                    tcfg.refine_feature_sigma / std::max(oks_init, tcfg.min_quality);
                for (std::size_t j = 0; j < spec.k; ++j) {
                    const double rx = (gt->pose.keypoints[j].x - initial.keypoints[j].x) / stride +
                                      s2sigma * rng.normal();
                    const double ry = (gt->pose.keypoints[j].y - initial.keypoints[j].y) / stride +
                                      s2sigma * rng.normal();
                    h.offsets2[j] = {
                        (model.gain2[li][2 * j] * rx + model.bias2[li][2 * j]) * stride,
                        (model.gain2[li][2 * j + 1] * ry + model.bias2[li][2 * j + 1]) * stride};
                }
            }
            const Pose refined = decode_refined(h);
            const double oks_ref =
                compute_oks(refined, gt->pose, OksScale::from_instance(*gt), spec);
            const ScorePair sc = synthesize_scores(oks_ref, noise, rng);
            const double conf = fuse_confidence(sc.cls, sc.pose, strategy.score_mode, oks_ref);
            if (conf < nms_cfg.score_floor) continue;
            Detection d;
            d.pose = refined;
            d.confidence = conf;
            d.source_level = level;
            dets_per_level[li].push_back(std::move(d));
        }
    }
    std::vector<Detection> merged = merge_levels(dets_per_level);
    if (merged.size() > kPreNmsTopK) {
        std::sort(merged.begin(), merged.end(), detection_before);
        merged.resize(kPreNmsTopK);
    }
    return pose_nms(std::move(merged), nms_cfg, spec);
}

/// Train on fresh scenes and evaluate on held-out ones; the whole run is a
/// pure function of (configs, seed).
inline EvalResult train_and_evaluate(const StrategyConfig& strategy, const TrainerConfig& tcfg,
                                     const SceneConfig& scfg, const NoiseModel& noise,
                                     const SkeletonSpec& spec, std::uint64_t seed,
                                     const NmsConfig& nms_cfg = {},
                                     const AssignerConfig& acfg = {}) {
    std::vector<SimScene> train;
    for (std::size_t i = 0; i < tcfg.train_scenes; ++i)
        train.push_back(generate_scene(seed * 7919ULL + i, scfg, spec));
    const TrainedModel model = toy_train(train, strategy, tcfg, noise, spec, seed, acfg);

    GtDataset gt;
    ResultSet rs;
    std::int64_t ann_id = 1;
    for (std::size_t i = 0; i < tcfg.heldout_scenes; ++i) {
        const std::uint64_t ss = seed * 104729ULL + 500 + i;
        const SimScene scene = generate_scene(ss, scfg, spec);
        const auto dets = predict_scene(scene, model.predictor, strategy, tcfg, noise, spec, ss,
                                        nms_cfg, acfg);
        const std::int64_t image_id = static_cast<std::int64_t>(i) + 1;
        append_scene_gt(gt, scene, image_id, ann_id);
        append_detections(rs, dets, image_id);
    }
    return evaluate(gt, rs, spec);
}

// ---------------------------------------------------------------------------
// strategy ablation

struct AblationRow {
    StrategyConfig strategy;
    EvalResult result;
};

struct AblationConfig {
    std::vector<StrategyConfig> strategies;
    TrainerConfig trainer;
    SceneConfig scene;
    NoiseModel noise;
    std::size_t seeds_per_row = 3;
};

inline std::vector<StrategyConfig> default_ablation_grid() {
    std::vector<StrategyConfig> g(5);
    g[0] = {"baseline", false, RefineRule::none, 0.5, ScoreMode::cls_only};
    g[1] = {"baseline_shrunk", true, RefineRule::none, 0.5, ScoreMode::cls_only};
    g[2] = {"refine_all", true, RefineRule::all_assigned, 0.5, ScoreMode::cls_only};
    g[3] = {"refine_oks", true, RefineRule::oks_threshold, 0.5, ScoreMode::cls_only};
    g[4] = {"refine_oks_psm", true, RefineRule::oks_threshold, 0.5, ScoreMode::fused};
    return g;
}

inline std::vector<AblationRow> run_strategy_ablation(const AblationConfig& cfg,
                                                      const SkeletonSpec& spec,
                                                      std::uint64_t seed, unsigned jobs = 1) {
    const std::size_t n_rows = cfg.strategies.size();
    const std::size_t n_tasks = n_rows * cfg.seeds_per_row;
    std::vector<EvalResult> task_results(n_tasks);
    parallel_for(n_tasks, jobs, [&](std::size_t t) {
        const std::size_t row = t / cfg.seeds_per_row;
        const std::size_t rep = t % cfg.seeds_per_row;
        task_results[t] = train_and_evaluate(cfg.strategies[row], cfg.trainer, cfg.scene,
                                             cfg.noise, spec, seed * 31ULL + rep);
    });
    std::vector<AblationRow> rows(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
        rows[r].strategy = cfg.strategies[r];
        double ap = 0, ap50 = 0, ap75 = 0, apm = 0, apl = 0, ar = 0;
        std::size_t nm = 0, nl = 0;
        for (std::size_t rep = 0; rep < cfg.seeds_per_row; ++rep) {
            const EvalResult& e = task_results[r * cfg.seeds_per_row + rep];
            ap += e.ap;
            ap50 += e.ap50;
            ap75 += e.ap75;
            ar += e.ar;
            if (e.ap_medium >= 0.0) {
                apm += e.ap_medium;
                ++nm;
            }
            if (e.ap_large >= 0.0) {
                apl += e.ap_large;
                ++nl;
            }
        }
        const double n = static_cast<double>(cfg.seeds_per_row);
        rows[r].result = {ap / n, ap50 / n, ap75 / n, nm ? apm / nm : -1.0, nl ? apl / nl : -1.0,
                          ar / n};
    }
    return rows;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "strategy,AP,AP50,AP75,APM,APL,AR\n";
    os.setf(std::ios::fixed);
    os.precision(6);
    for (const auto& r : rows) {
        os << r.strategy.name << ',' << r.result.ap << ',' << r.result.ap50 << ','
           << r.result.ap75 << ',' << r.result.ap_medium << ',' << r.result.ap_large << ','
           << r.result.ar << '\n';
    }
    return os.str();
}

}  // namespace posekit
