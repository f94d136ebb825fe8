#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "posekit/assign.hpp"
#include "posekit/losses.hpp"
#include "posekit/postprocess.hpp"
#include "posekit/sim.hpp"
#include "posekit/skeleton.hpp"

namespace posekit {

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& section) {
    if (!j.is_object()) throw SchemaError(section + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw SchemaError("unknown key '" + it.key() + "' in " + section);
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline SkeletonSpec skeleton_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j, {"k", "names", "kappas", "flip_pairs"}, "skeleton");
    SkeletonSpec s;
    s.k = detail::require<std::size_t>(j, "k");
    s.names = detail::require<std::vector<std::string>>(j, "names");
    s.kappas = detail::require<std::vector<double>>(j, "kappas");
    if (j.contains("flip_pairs"))
        for (const auto& p : j.at("flip_pairs"))
            s.flip_pairs.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>());
    s.validate();
    return s;
}

inline nlohmann::json skeleton_to_json(const SkeletonSpec& s) {
    nlohmann::json pairs = nlohmann::json::array();
    for (auto [a, b] : s.flip_pairs) pairs.push_back({a, b});
    return {{"k", s.k}, {"names", s.names}, {"kappas", s.kappas}, {"flip_pairs", pairs}};
}

inline AssignerConfig assigner_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j, {"shrunk_sides", "level_edges", "refine_oks_threshold", "full_box_positives"},
        "assigner");
    AssignerConfig c;
    if (j.contains("shrunk_sides")) {
        auto v = j.at("shrunk_sides").get<std::vector<double>>();
        if (v.size() != kNumLevels) throw SchemaError("shrunk_sides needs 5 entries");
        std::copy(v.begin(), v.end(), c.shrunk_sides.begin());
    }
    if (j.contains("level_edges")) {
        auto v = j.at("level_edges").get<std::vector<double>>();
        if (v.size() != kNumLevels - 1) throw SchemaError("level_edges needs 4 entries");
        std::copy(v.begin(), v.end(), c.level_edges.begin());
    }
    detail::read_if(j, "refine_oks_threshold", c.refine_oks_threshold);
    detail::read_if(j, "full_box_positives", c.full_box_positives);
    c.validate();
    return c;
}

inline nlohmann::json assigner_to_json(const AssignerConfig& c) {
    return {{"shrunk_sides", c.shrunk_sides},
            {"level_edges", c.level_edges},
            {"refine_oks_threshold", c.refine_oks_threshold},
            {"full_box_positives", c.full_box_positives}};
}

inline NmsMode nms_mode_from_string(const std::string& s) {
    if (s == "hard") return NmsMode::hard;
    if (s == "soft-linear") return NmsMode::soft_linear;
    if (s == "soft-gaussian") return NmsMode::soft_gaussian;
    throw SchemaError("unknown NMS mode '" + s + "'");
}

inline std::string to_string(NmsMode m) {
    switch (m) {
        case NmsMode::hard: return "hard";
        case NmsMode::soft_linear: return "soft-linear";
        default: return "soft-gaussian";
    }
}

inline ScoreMode score_mode_from_string(const std::string& s) {
    if (s == "fused") return ScoreMode::fused;
    if (s == "cls") return ScoreMode::cls_only;
    if (s == "gt-oks") return ScoreMode::gt_oks;
    throw SchemaError("unknown score mode '" + s + "'");
}

inline std::string to_string(ScoreMode m) {
    switch (m) {
        case ScoreMode::fused: return "fused";
        case ScoreMode::cls_only: return "cls";
        default: return "gt-oks";
    }
}

inline RefineRule refine_rule_from_string(const std::string& s) {
    if (s == "none") return RefineRule::none;
    if (s == "all-assigned") return RefineRule::all_assigned;
    if (s == "oks-threshold") return RefineRule::oks_threshold;
    throw SchemaError("unknown refine rule '" + s + "'");
}

inline std::string to_string(RefineRule r) {
    switch (r) {
        case RefineRule::none: return "none";
        case RefineRule::all_assigned: return "all-assigned";
        default: return "oks-threshold";
    }
}

inline NmsConfig nms_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j, {"oks_threshold", "mode", "soft_sigma", "score_floor", "max_detections"}, "nms");
    NmsConfig c;
    detail::read_if(j, "oks_threshold", c.oks_threshold);
    if (j.contains("mode")) c.mode = nms_mode_from_string(j.at("mode").get<std::string>());
    detail::read_if(j, "soft_sigma", c.soft_sigma);
    detail::read_if(j, "score_floor", c.score_floor);
    detail::read_if(j, "max_detections", c.max_detections);
    c.validate();
    return c;
}

inline nlohmann::json nms_to_json(const NmsConfig& c) {
    return {{"oks_threshold", c.oks_threshold},
            {"mode", to_string(c.mode)},
            {"soft_sigma", c.soft_sigma},
            {"score_floor", c.score_floor},
            {"max_detections", c.max_detections}};
}

inline LossWeights loss_weights_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j, {"cls", "heatmap", "reg_initial", "reg_refined", "score"},
                                "loss_weights");
    LossWeights w;
    detail::read_if(j, "cls", w.cls);
    detail::read_if(j, "heatmap", w.heatmap);
    detail::read_if(j, "reg_initial", w.reg_initial);
    detail::read_if(j, "reg_refined", w.reg_refined);
    detail::read_if(j, "score", w.score);
    w.validate();
    return w;
}

inline nlohmann::json loss_weights_to_json(const LossWeights& w) {
    return {{"cls", w.cls},
            {"heatmap", w.heatmap},
            {"reg_initial", w.reg_initial},
            {"reg_refined", w.reg_refined},
            {"score", w.score}};
}

inline NoiseModel noise_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j,
                                {"base_sigma", "center_slope", "refine_gain", "cls_noise",
                                 "score_corr", "psm_noise", "refine_gate_oks"},
                                "noise");
    NoiseModel m;
    detail::read_if(j, "base_sigma", m.base_sigma);
    detail::read_if(j, "center_slope", m.center_slope);
    detail::read_if(j, "refine_gain", m.refine_gain);
    detail::read_if(j, "cls_noise", m.cls_noise);
    detail::read_if(j, "score_corr", m.score_corr);
    detail::read_if(j, "psm_noise", m.psm_noise);
    detail::read_if(j, "refine_gate_oks", m.refine_gate_oks);
    m.validate();
    return m;
}

inline nlohmann::json noise_to_json(const NoiseModel& m) {
    return {{"base_sigma", m.base_sigma},       {"center_slope", m.center_slope},
            {"refine_gain", m.refine_gain},     {"cls_noise", m.cls_noise},
            {"score_corr", m.score_corr},       {"psm_noise", m.psm_noise},
            {"refine_gate_oks", m.refine_gate_oks}};
}

inline SceneConfig scene_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j,
                                {"image_w", "image_h", "min_instances", "max_instances",
                                 "min_scale", "max_scale", "pose_jitter", "max_overlap_oks"},
                                "scene");
    SceneConfig c;
    detail::read_if(j, "image_w", c.image_w);
    detail::read_if(j, "image_h", c.image_h);
    detail::read_if(j, "min_instances", c.min_instances);
    detail::read_if(j, "max_instances", c.max_instances);
    detail::read_if(j, "min_scale", c.min_scale);
    detail::read_if(j, "max_scale", c.max_scale);
    detail::read_if(j, "pose_jitter", c.pose_jitter);
    detail::read_if(j, "max_overlap_oks", c.max_overlap_oks);
    c.validate();
    return c;
}

inline nlohmann::json scene_to_json(const SceneConfig& c) {
    return {{"image_w", c.image_w},           {"image_h", c.image_h},
            {"min_instances", c.min_instances}, {"max_instances", c.max_instances},
            {"min_scale", c.min_scale},       {"max_scale", c.max_scale},
            {"pose_jitter", c.pose_jitter},   {"max_overlap_oks", c.max_overlap_oks}};
}

inline TrainerConfig trainer_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j,
                                {"train_scenes", "heldout_scenes", "iterations", "learning_rate",
                                 "refine_feature_sigma", "min_quality"},
                                "trainer");
    TrainerConfig c;
    detail::read_if(j, "train_scenes", c.train_scenes);
    detail::read_if(j, "heldout_scenes", c.heldout_scenes);
    detail::read_if(j, "iterations", c.iterations);
    detail::read_if(j, "learning_rate", c.learning_rate);
    detail::read_if(j, "refine_feature_sigma", c.refine_feature_sigma);
    detail::read_if(j, "min_quality", c.min_quality);
    return c;
}

inline nlohmann::json trainer_to_json(const TrainerConfig& c) {
    return {{"train_scenes", c.train_scenes},
            {"heldout_scenes", c.heldout_scenes},
            {"iterations", c.iterations},
            {"learning_rate", c.learning_rate},
            {"refine_feature_sigma", c.refine_feature_sigma},
            {"min_quality", c.min_quality}};
}

inline StrategyConfig strategy_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j, {"name", "positive_rule", "refine_rule", "refine_threshold", "score_mode"},
        "strategy");
    StrategyConfig s;
    detail::read_if(j, "name", s.name);
    if (j.contains("positive_rule")) {
        const auto rule = j.at("positive_rule").get<std::string>();
        if (rule == "shrunk-box")
            s.shrunk_positives = true;
        else if (rule == "full-box")
            s.shrunk_positives = false;
        else
            throw SchemaError("unknown positive_rule '" + rule + "'");
    }
    if (j.contains("refine_rule"))
        s.refine_rule = refine_rule_from_string(j.at("refine_rule").get<std::string>());
    detail::read_if(j, "refine_threshold", s.refine_threshold);
    if (j.contains("score_mode"))
        s.score_mode = score_mode_from_string(j.at("score_mode").get<std::string>());
    s.validate();
    return s;
}

inline nlohmann::json strategy_to_json(const StrategyConfig& s) {
    return {{"name", s.name},
            {"positive_rule", s.shrunk_positives ? "shrunk-box" : "full-box"},
            {"refine_rule", to_string(s.refine_rule)},
            {"refine_threshold", s.refine_threshold},
            {"score_mode", to_string(s.score_mode)}};
}

/// Merged tool configuration: one file with per-module sections, all optional.
struct RunConfig {
    SkeletonSpec skeleton = coco_skeleton();
    AssignerConfig assigner;
    NmsConfig nms;
    LossWeights loss_weights;
    NoiseModel noise;
    SceneConfig scene;
    TrainerConfig trainer;
    std::vector<StrategyConfig> strategies = default_ablation_grid();
    std::size_t seeds_per_row = 3;
};

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j,
                                {"skeleton", "assigner", "nms", "loss_weights", "noise", "scene",
                                 "trainer", "strategies", "seeds_per_row"},
                                "config");
    RunConfig c;
    if (j.contains("skeleton")) c.skeleton = skeleton_from_json(j.at("skeleton"));
    if (j.contains("assigner")) c.assigner = assigner_from_json(j.at("assigner"));
    if (j.contains("nms")) c.nms = nms_from_json(j.at("nms"));
    if (j.contains("loss_weights")) c.loss_weights = loss_weights_from_json(j.at("loss_weights"));
    if (j.contains("noise")) c.noise = noise_from_json(j.at("noise"));
    if (j.contains("scene")) c.scene = scene_from_json(j.at("scene"));
    if (j.contains("trainer")) c.trainer = trainer_from_json(j.at("trainer"));
    if (j.contains("strategies")) {
        c.strategies.clear();
        for (const auto& js : j.at("strategies")) c.strategies.push_back(strategy_from_json(js));
    }
    detail::read_if(j, "seeds_per_row", c.seeds_per_row);
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    return run_config_from_json(detail::parse_json_file(path));
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
    nlohmann::json strategies = nlohmann::json::array();
    for (const auto& s : c.strategies) strategies.push_back(strategy_to_json(s));
    return {{"skeleton", skeleton_to_json(c.skeleton)},
            {"assigner", assigner_to_json(c.assigner)},
            {"nms", nms_to_json(c.nms)},
            {"loss_weights", loss_weights_to_json(c.loss_weights)},
            {"noise", noise_to_json(c.noise)},
            {"scene", scene_to_json(c.scene)},
            {"trainer", trainer_to_json(c.trainer)},
            {"strategies", strategies},
            {"seeds_per_row", c.seeds_per_row}};
}

}  // namespace posekit
