#pragma once

// JSON fixture schemas shared by the CLI and tests: poses, detections,
// hypotheses and simulator scenes.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "posekit/coco_eval.hpp"
#include "posekit/hypothesis.hpp"
#include "posekit/pose.hpp"
#include "posekit/sim.hpp"

namespace posekit {

inline std::vector<double> flatten_pose(const Pose& p) {
    std::vector<double> out;
    out.reserve(3 * p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        out.push_back(p.keypoints[j].x);
        out.push_back(p.keypoints[j].y);
        out.push_back(static_cast<double>(p.visibility[j]));
    }
    return out;
}

inline Pose pose_from_json(const nlohmann::json& j, std::size_t k) {
    auto kp = detail::require<std::vector<double>>(j, "keypoints");
    detail::check_keypoints_length(kp, k);
    return pose_from_flat(kp);
}

inline GroundTruthInstance instance_from_json(const nlohmann::json& j, std::size_t k) {
    GroundTruthInstance gt = make_instance(pose_from_json(j, k),
                                           detail::require<std::int64_t>(j, "id"));
    if (j.contains("area")) gt.area = j.at("area").get<double>();
    return gt;
}

inline nlohmann::json instance_to_json(const GroundTruthInstance& gt) {
    nlohmann::json j = {{"id", gt.id}, {"keypoints", flatten_pose(gt.pose)}};
    if (gt.has_area()) j["area"] = gt.area;
    return j;
}

inline Detection detection_from_json(const nlohmann::json& j, std::size_t k) {
    Detection d;
    d.pose = pose_from_json(j, k);
    d.confidence = detail::require<double>(j, "score");
    if (j.contains("level")) d.source_level = j.at("level").get<int>();
    return d;
}

inline nlohmann::json detection_to_json(const Detection& d) {
    return {{"keypoints", flatten_pose(d.pose)},
            {"score", d.confidence},
            {"level", d.source_level}};
}

inline std::vector<Point> points_from_flat(const std::vector<double>& v) {
    std::vector<Point> out(v.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {v[2 * i], v[2 * i + 1]};
    return out;
}

inline std::vector<double> points_to_flat(const std::vector<Point>& pts) {
    std::vector<double> out;
    out.reserve(2 * pts.size());
    for (const Point& p : pts) {
        out.push_back(p.x);
        out.push_back(p.y);
    }
    return out;
}

inline AssignedHypothesis hypothesis_from_json(const nlohmann::json& j, std::size_t k) {
    AssignedHypothesis ah;
    ah.hypothesis.location = make_location(detail::require<int>(j, "level"),
                                           detail::require<int>(j, "ix"),
                                           detail::require<int>(j, "iy"));
    auto o1 = detail::require<std::vector<double>>(j, "offsets1");
    auto o2 = detail::require<std::vector<double>>(j, "offsets2");
    if (o1.size() != 2 * k || o2.size() != 2 * k)
        throw LengthError("offsets arrays must have length 2K");
    ah.hypothesis.offsets1 = points_from_flat(o1);
    ah.hypothesis.offsets2 = points_from_flat(o2);
    if (j.contains("cls_score")) ah.hypothesis.cls_score = j.at("cls_score").get<double>();
    if (j.contains("pose_score")) ah.hypothesis.pose_score = j.at("pose_score").get<double>();
    if (j.contains("instance_id") && !j.at("instance_id").is_null())
        ah.instance_id = j.at("instance_id").get<std::int64_t>();
    return ah;
}

inline nlohmann::json hypothesis_to_json(const SimHypothesis& sh) {
    nlohmann::json j = {{"level", sh.hyp.location.level},
                        {"ix", sh.hyp.location.ix},
                        {"iy", sh.hyp.location.iy},
                        {"offsets1", points_to_flat(sh.hyp.offsets1)},
                        {"offsets2", points_to_flat(sh.hyp.offsets2)},
                        {"cls_score", sh.hyp.cls_score},
                        {"pose_score", sh.hyp.pose_score},
                        {"oracle_oks", sh.oracle_oks}};
    if (sh.instance_id)
        j["instance_id"] = *sh.instance_id;
    else
        j["instance_id"] = nullptr;
    return j;
}

inline nlohmann::json scene_instances_to_json(const SimScene& scene) {
    nlohmann::json j = {{"image_w", scene.image_w},
                        {"image_h", scene.image_h},
                        {"instances", nlohmann::json::array()}};
    for (const auto& gt : scene.instances) j["instances"].push_back(instance_to_json(gt));
    return j;
}

}  // namespace posekit
