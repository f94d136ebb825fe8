// posekit command line: every pipeline stage as a subcommand over JSON/CSV
// fixtures. Exit codes: 0 ok, 1 usage, 2 input/schema error, 3 internal.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "posekit/assign.hpp"
#include "posekit/coco_eval.hpp"
#include "posekit/config.hpp"
#include "posekit/error.hpp"
#include "posekit/fixtures.hpp"
#include "posekit/losses.hpp"
#include "posekit/oks.hpp"
#include "posekit/postprocess.hpp"
#include "posekit/sim.hpp"

namespace pk = posekit;
using nlohmann::json;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    unsigned jobs = std::thread::hardware_concurrency();
    std::string out_path;
};

pk::RunConfig resolve_config(const GlobalOpts& g) {
    std::string path = g.config_path;
    if (path.empty()) {
        if (const char* env = std::getenv("DENSEPOSE_KIT_CONFIG")) path = env;
    }
    if (path.empty()) return pk::RunConfig{};
    return pk::load_run_config(path);
}

void emit(const GlobalOpts& g, const std::string& text) {
    std::cout << text;
    if (!g.out_path.empty()) {
        std::ofstream out(g.out_path);
        if (!out) throw pk::Error("cannot write " + g.out_path);
        out << text;
    }
}

void emit_json(const GlobalOpts& g, json j) {
    emit(g, j.dump(2) + "\n");
}

json eval_result_to_json(const pk::EvalResult& e) {
    return {{"AP", e.ap},         {"AP50", e.ap50},     {"AP75", e.ap75},
            {"APM", e.ap_medium}, {"APL", e.ap_large},  {"AR", e.ar}};
}

int run(int argc, char** argv) {
    CLI::App app{"dense pose regression decision core"};
    app.require_subcommand(1);
    GlobalOpts g;
    app.add_option("--config", g.config_path, "JSON config file");
    app.add_option("--seed", g.seed, "master seed for stochastic paths");
    app.add_option("--jobs", g.jobs, "worker threads");
    app.add_option("--out", g.out_path, "also write stdout payload to this file");

    // oks
    auto* cmd_oks = app.add_subcommand("oks", "OKS between two poses");
    std::string oks_gt, oks_dt;
    cmd_oks->add_option("--gt", oks_gt, "GT pose JSON")->required();
    cmd_oks->add_option("--dt", oks_dt, "predicted pose JSON")->required();

    // assign
    auto* cmd_assign = app.add_subcommand("assign", "per-location assignments for a scene fixture");
    std::string assign_in;
    cmd_assign->add_option("--scene", assign_in, "scene fixture JSON")->required();

    // nms
    auto* cmd_nms = app.add_subcommand("nms", "OKS pose NMS over a detections fixture");
    std::string nms_in, nms_mode, nms_score_mode;
    double nms_thr = -1.0;
    cmd_nms->add_option("--dets", nms_in, "detections JSON")->required();
    cmd_nms->add_option("--oks-thr", nms_thr, "OKS suppression threshold");
    cmd_nms->add_option("--mode", nms_mode, "hard | soft-linear | soft-gaussian");
    cmd_nms->add_option("--score-mode", nms_score_mode, "fused | cls | gt-oks");

    // eval
    auto* cmd_eval = app.add_subcommand("eval", "COCO-style keypoint AP/AR");
    std::string eval_gt, eval_dt;
    cmd_eval->add_option("--gt", eval_gt, "annotations JSON")->required();
    cmd_eval->add_option("--dt", eval_dt, "results JSON")->required();

    // losses
    auto* cmd_losses = app.add_subcommand("losses", "loss components from a fixture");
    std::string losses_in;
    cmd_losses->add_option("--fixture", losses_in, "predictions + targets JSON")->required();

    // simulate
    auto* cmd_sim = app.add_subcommand("simulate", "emit scenes + predictions fixture");
    std::size_t sim_scenes = 1;
    cmd_sim->add_option("--scenes", sim_scenes, "number of scenes");

    // ablate
    auto* cmd_ablate = app.add_subcommand("ablate", "strategy ablation table (CSV)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    const pk::RunConfig cfg = resolve_config(g);
    const pk::SkeletonSpec& spec = cfg.skeleton;
    if (g.jobs == 0) g.jobs = 1;

    if (cmd_oks->parsed()) {
        const json jg = pk::detail::parse_json_file(oks_gt);
        const json jd = pk::detail::parse_json_file(oks_dt);
        pk::Pose gtp = pk::pose_from_json(jg, spec.k);
        pk::Pose dtp = pk::pose_from_json(jd, spec.k);
        pk::GroundTruthInstance gt = pk::make_instance(gtp, 0);
        if (jg.contains("area")) gt.area = jg.at("area").get<double>();
        const double oks =
            pk::compute_oks(dtp, gt.pose, pk::OksScale::from_instance(gt), spec);
        emit_json(g, {{"oks", oks}, {"config", pk::run_config_to_json(cfg)}});
        return 0;
    }

    if (cmd_assign->parsed()) {
        const json js = pk::detail::parse_json_file(assign_in);
        const double w = pk::detail::require<double>(js, "image_w");
        const double h = pk::detail::require<double>(js, "image_h");
        std::vector<pk::GroundTruthInstance> instances;
        for (const auto& ji : pk::detail::require<json>(js, "instances"))
            instances.push_back(pk::instance_from_json(ji, spec.k));
        std::array<std::vector<pk::GroundTruthInstance>, pk::kNumLevels> per_level;
        for (const auto& gt : instances)
            per_level[pk::level_for_max_side(gt.box.max_side(), cfg.assigner) - pk::kMinLevel]
                .push_back(gt);
        std::ostringstream os;
        for (int level = pk::kMinLevel; level <= pk::kMaxLevel; ++level) {
            for (const auto& loc : pk::grid_locations(level, w, h)) {
                auto id = pk::assign_location_to_instance(
                    loc, per_level[level - pk::kMinLevel]);
                if (!id) continue;
                const pk::GroundTruthInstance* gt = pk::find_instance(instances, *id);
                json line = {{"level", loc.level},
                             {"ix", loc.ix},
                             {"iy", loc.iy},
                             {"x_c", loc.x_c},
                             {"y_c", loc.y_c},
                             {"instance_id", *id},
                             {"initial_positive",
                              pk::is_initial_positive(loc, *gt, cfg.assigner)}};
                os << line.dump() << "\n";
            }
        }
        emit(g, os.str());
        return 0;
    }

    if (cmd_nms->parsed()) {
        const json jd = pk::detail::parse_json_file(nms_in);
        pk::NmsConfig ncfg = cfg.nms;
        if (nms_thr >= 0.0) ncfg.oks_threshold = nms_thr;
        if (!nms_mode.empty()) ncfg.mode = pk::nms_mode_from_string(nms_mode);
        ncfg.validate();
        const pk::ScoreMode smode = nms_score_mode.empty()
                                        ? pk::ScoreMode::fused
                                        : pk::score_mode_from_string(nms_score_mode);
        std::vector<pk::Detection> dets;
        for (const auto& je : pk::detail::require<json>(jd, "detections")) {
            pk::Detection d;
            d.pose = pk::pose_from_json(je, spec.k);
            if (je.contains("level")) d.source_level = je.at("level").get<int>();
            if (je.contains("score")) {
                d.confidence = je.at("score").get<double>();
            } else {
                const double cls = pk::detail::require<double>(je, "cls_score");
                const double ps = pk::detail::require<double>(je, "pose_score");
                const double oracle =
                    je.contains("oracle_oks") ? je.at("oracle_oks").get<double>() : -1.0;
                d.confidence = pk::fuse_confidence(cls, ps, smode, oracle);
            }
            dets.push_back(std::move(d));
        }
        const auto survivors = pk::pose_nms(std::move(dets), ncfg, spec);
        json out = {{"detections", json::array()},
                    {"config", pk::run_config_to_json(cfg)}};
        for (const auto& d : survivors) out["detections"].push_back(pk::detection_to_json(d));
        emit_json(g, out);
        return 0;
    }

    if (cmd_eval->parsed()) {
        const pk::GtDataset gt = pk::load_gt(eval_gt, spec);
        const pk::ResultSet rs = pk::load_results(eval_dt, spec);
        const pk::EvalResult e = pk::evaluate(gt, rs, spec);
        char row[160];
        std::snprintf(row, sizeof(row), "%.3f %.3f %.3f %.3f %.3f %.3f", e.ap, e.ap50, e.ap75,
                      e.ap_medium, e.ap_large, e.ar);
        std::cerr << "AP AP50 AP75 APM APL AR\n" << row << "\n";
        emit_json(g, {{"metrics", eval_result_to_json(e)},
                      {"config", pk::run_config_to_json(cfg)}});
        return 0;
    }

    if (cmd_losses->parsed()) {
        const json jf = pk::detail::parse_json_file(losses_in);
        pk::LossComponents comp;
        bool warn_initial = false, warn_refined = false;
        if (jf.contains("cls")) {
            const auto& jc = jf.at("cls");
            comp.cls = pk::focal_loss(pk::detail::require<std::vector<double>>(jc, "pred"),
                                      pk::detail::require<std::vector<int>>(jc, "target"));
        }
        if (jf.contains("heatmap")) {
            const auto& jh = jf.at("heatmap");
            pk::HeatmapTarget pred, target;
            pred.width = target.width = pk::detail::require<int>(jh, "width");
            pred.height = target.height = pk::detail::require<int>(jh, "height");
            pred.channels = target.channels = pk::detail::require<std::size_t>(jh, "channels");
            pred.values = pk::detail::require<std::vector<double>>(jh, "pred");
            target.values = pk::detail::require<std::vector<double>>(jh, "target");
            const std::size_t n = pred.channels * pred.width * pred.height;
            if (pred.values.size() != n || target.values.size() != n)
                throw pk::ShapeMismatch("heatmap fixture values vs dims");
            comp.heatmap = pk::heatmap_loss(pred, target);
        }
        if (jf.contains("regression")) {
            const auto& jr = jf.at("regression");
            std::vector<pk::GroundTruthInstance> instances;
            for (const auto& ji : pk::detail::require<json>(jr, "instances"))
                instances.push_back(pk::instance_from_json(ji, spec.k));
            std::vector<pk::AssignedHypothesis> hyps;
            for (const auto& jh : pk::detail::require<json>(jr, "hypotheses"))
                hyps.push_back(pk::hypothesis_from_json(jh, spec.k));
            std::vector<std::size_t> initial_pos;
            for (std::size_t i = 0; i < hyps.size(); ++i) {
                if (!hyps[i].instance_id) continue;
                const auto* gt = pk::find_instance(instances, *hyps[i].instance_id);
                if (gt && pk::is_initial_positive(hyps[i].hypothesis.location, *gt, cfg.assigner))
                    initial_pos.push_back(i);
            }
            const auto refine_pos =
                pk::refinement_positives(hyps, instances, cfg.assigner, spec);
            const auto li = pk::l1_regression_loss(hyps, initial_pos, instances,
                                                   pk::RegressionStage::initial);
            const auto lr = pk::l1_regression_loss(hyps, refine_pos, instances,
                                                   pk::RegressionStage::refined);
            comp.reg_initial = li.value;
            comp.reg_refined = lr.value;
            warn_initial = li.empty_positive_set;
            warn_refined = lr.empty_positive_set;
            if (jf.contains("psm") == false) {
                const auto targets = pk::psm_targets(hyps, instances, spec);
                std::vector<double> preds;
                for (const auto& h : hyps) preds.push_back(h.hypothesis.pose_score);
                comp.score = pk::bce_score_loss(preds, targets);
            }
        }
        if (jf.contains("psm")) {
            const auto& jp = jf.at("psm");
            comp.score = pk::bce_score_loss(pk::detail::require<std::vector<double>>(jp, "pred"),
                                            pk::detail::require<std::vector<double>>(jp, "target"));
        }
        const double total = pk::total_loss(comp, cfg.loss_weights);
        emit_json(g, {{"components",
                       {{"cls", comp.cls},
                        {"heatmap", comp.heatmap},
                        {"reg_initial", comp.reg_initial},
                        {"reg_refined", comp.reg_refined},
                        {"psm", comp.score}}},
                      {"total", total},
                      {"warnings",
                       {{"empty_initial_positives", warn_initial},
                        {"empty_refined_positives", warn_refined}}},
                      {"config", pk::run_config_to_json(cfg)}});
        return 0;
    }

    if (cmd_sim->parsed()) {
        json scenes = json::array();
        for (std::size_t i = 0; i < sim_scenes; ++i) {
            const std::uint64_t ss = g.seed * 1000003ULL + i;
            const pk::SimScene scene = pk::generate_scene(ss, cfg.scene, spec);
            const pk::SimPredictions preds =
                pk::simulate_predictions(scene, cfg.noise, ss, spec, cfg.assigner);
            json js = pk::scene_instances_to_json(scene);
            js["seed"] = ss;
            js["hypotheses"] = json::array();
            for (const auto& lvl : preds.levels)
                for (const auto& sh : lvl) js["hypotheses"].push_back(pk::hypothesis_to_json(sh));
            scenes.push_back(std::move(js));
        }
        emit_json(g, {{"scenes", scenes}, {"config", pk::run_config_to_json(cfg)}});
        return 0;
    }

    if (cmd_ablate->parsed()) {
        pk::AblationConfig acfg;
        acfg.strategies = cfg.strategies;
        acfg.trainer = cfg.trainer;
        acfg.scene = cfg.scene;
        acfg.noise = cfg.noise;
        acfg.seeds_per_row = cfg.seeds_per_row;
        const auto rows = pk::run_strategy_ablation(acfg, spec, g.seed, g.jobs);
        const std::string csv = pk::ablation_csv(rows);
        std::cout << csv;
        if (!g.out_path.empty()) {
            json report = {{"config", pk::run_config_to_json(cfg)},
                           {"seed", g.seed},
                           {"rows", json::array()}};
            for (const auto& r : rows)
                report["rows"].push_back({{"strategy", pk::strategy_to_json(r.strategy)},
                                          {"metrics", eval_result_to_json(r.result)}});
            std::ofstream out(g.out_path);
            if (!out) throw pk::Error("cannot write " + g.out_path);
            out << report.dump(2) << "\n";
        }
        return 0;
    }

    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const pk::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const pk::SchemaError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const pk::LengthError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const pk::InvalidConfig& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const pk::OutOfRange& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const pk::UnknownImageId& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const pk::Error& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
