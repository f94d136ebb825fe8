#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "posekit/sim.hpp"
#include "posekit/skeleton.hpp"

using namespace posekit;

TEST_CASE("generate_scene is a pure function of the seed") {
    const SkeletonSpec spec = coco_skeleton();
    SceneConfig cfg;
    const SimScene a = generate_scene(42, cfg, spec);
    const SimScene b = generate_scene(42, cfg, spec);
    REQUIRE(a.instances.size() == b.instances.size());
    for (std::size_t i = 0; i < a.instances.size(); ++i)
        for (std::size_t j = 0; j < 17; ++j) {
            CHECK(a.instances[i].pose.keypoints[j].x == b.instances[i].pose.keypoints[j].x);
            CHECK(a.instances[i].pose.keypoints[j].y == b.instances[i].pose.keypoints[j].y);
        }
    const SimScene c = generate_scene(43, cfg, spec);
    CHECK((c.instances.size() != a.instances.size() ||
           c.instances[0].pose.keypoints[0].x != a.instances[0].pose.keypoints[0].x));
}

TEST_CASE("zero instance count yields an empty scene") {
    const SkeletonSpec spec = coco_skeleton();
    SceneConfig cfg;
    cfg.min_instances = 0;
    cfg.max_instances = 0;
    CHECK(generate_scene(1, cfg, spec).instances.empty());
}

TEST_CASE("instance scales stay within the configured range over many seeds") {
    const SkeletonSpec spec = coco_skeleton();
    SceneConfig cfg;
    double lo = 1e300, hi = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const SimScene s = generate_scene(seed, cfg, spec);
        for (const auto& gt : s.instances) {
            const double side = gt.box.height();
            lo = std::min(lo, side);
            hi = std::max(hi, side);
            CHECK(gt.box.x_min >= 0.0);
            CHECK(gt.box.y_min >= 0.0);
            CHECK(gt.box.x_max <= cfg.image_w);
            CHECK(gt.box.y_max <= cfg.image_h);
            CHECK(gt.pose.labeled_count() == 17);
        }
    }
    // template spans roughly 0.94 of the height parameter; allow jitter headroom
    CHECK(lo > 0.5 * cfg.min_scale);
    CHECK(hi < 1.3 * cfg.max_scale);
    CHECK(hi > 0.6 * cfg.max_scale);  // range actually explored
}

TEST_CASE("noiseless predictions decode exactly to ground truth") {
    const SkeletonSpec spec = coco_skeleton();
    SceneConfig scfg;
    const SimScene scene = generate_scene(5, scfg, spec);
    REQUIRE(!scene.instances.empty());
    const SimPredictions preds = simulate_predictions(scene, NoiseModel::noiseless(), 5, spec);
    std::size_t assigned = 0;
    for (const auto& lvl : preds.levels) {
        for (const auto& sh : lvl) {
            if (!sh.instance_id) continue;
            ++assigned;
            CHECK(sh.oracle_oks == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(sh.hyp.cls_score == doctest::Approx(1.0));
            CHECK(sh.hyp.pose_score == doctest::Approx(1.0));
            const GroundTruthInstance* gt = find_instance(scene.instances, *sh.instance_id);
            const Pose p = decode_refined(sh.hyp);
            for (std::size_t j = 0; j < 17; ++j) {
                CHECK(p.keypoints[j].x == doctest::Approx(gt->pose.keypoints[j].x).epsilon(1e-9));
                CHECK(p.keypoints[j].y == doctest::Approx(gt->pose.keypoints[j].y).epsilon(1e-9));
            }
        }
    }
    CHECK(assigned > 0);
}

TEST_CASE("predictions never contain NaN offsets or out-of-range scores") {
    const SkeletonSpec spec = coco_skeleton();
    SceneConfig scfg;
    NoiseModel noise;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const SimScene scene = generate_scene(seed, scfg, spec);
        const SimPredictions preds = simulate_predictions(scene, noise, seed, spec);
        for (const auto& lvl : preds.levels) {
            for (const auto& sh : lvl) {
                CHECK(sh.hyp.cls_score >= 0.0);
                CHECK(sh.hyp.cls_score <= 1.0);
                CHECK(sh.hyp.pose_score >= 0.0);
                CHECK(sh.hyp.pose_score <= 1.0);
                for (const auto& o : sh.hyp.offsets1) {
                    CHECK(std::isfinite(o.x));
                    CHECK(std::isfinite(o.y));
                }
            }
        }
    }
}

TEST_CASE("initial quality decays away from the instance center") {
    const SkeletonSpec spec = coco_skeleton();
    SceneConfig scfg;
    scfg.min_instances = 2;
    scfg.max_instances = 4;
    NoiseModel noise;
    noise.center_slope = 12.0;
    double center_sum = 0.0, edge_sum = 0.0;
    std::size_t center_n = 0, edge_n = 0;
    for (std::uint64_t seed = 0; seed < 40 && (center_n < 1000 || edge_n < 1000); ++seed) {
        const SimScene scene = generate_scene(seed, scfg, spec);
        const SimPredictions preds = simulate_predictions(scene, noise, seed, spec);
        for (const auto& lvl : preds.levels) {
            for (const auto& sh : lvl) {
                if (!sh.instance_id) continue;
                const GroundTruthInstance* gt = find_instance(scene.instances, *sh.instance_id);
                const Pose initial = decode_initial(sh.hyp);
                const double oks = compute_oks(initial, gt->pose,
                                               OksScale::from_instance(*gt), spec);
                const Point c = gt->box.center();
                const double dist = std::hypot(sh.hyp.location.x_c - c.x,
                                               sh.hyp.location.y_c - c.y);
                const double rel = dist / std::max(gt->box.max_side(), 1.0);
                if (rel < 0.15) {
                    center_sum += oks;
                    ++center_n;
                } else if (rel > 0.35) {
                    edge_sum += oks;
                    ++edge_n;
                }
            }
        }
    }
    REQUIRE(center_n > 100);
    REQUIRE(edge_n > 100);
    CHECK(center_sum / center_n >= edge_sum / edge_n);
}

TEST_CASE("score_corr 0 decorrelates cls score from true OKS") {
    NoiseModel noise;
    noise.score_corr = 0.0;
    noise.cls_noise = 0.0;
    Rng rng(77);
    std::vector<double> oks, cls;
    for (int i = 0; i < 10000; ++i) {
        const double q = rng.uniform();
        const ScorePair s = synthesize_scores(q, noise, rng);
        oks.push_back(q);
        cls.push_back(s.cls);
    }
    double mo = 0, mc = 0;
    for (int i = 0; i < 10000; ++i) {
        mo += oks[i];
        mc += cls[i];
    }
    mo /= 10000;
    mc /= 10000;
    double cov = 0, vo = 0, vc = 0;
    for (int i = 0; i < 10000; ++i) {
        cov += (oks[i] - mo) * (cls[i] - mc);
        vo += (oks[i] - mo) * (oks[i] - mo);
        vc += (cls[i] - mc) * (cls[i] - mc);
    }
    const double corr = cov / std::sqrt(vo * vc);
    CHECK(std::abs(corr) < 0.1);
}

TEST_CASE("toy trainer recovers an exact linear relation") {
    const SkeletonSpec spec = coco_skeleton();
    SceneConfig scfg;
    NoiseModel noise = NoiseModel::noiseless();
    std::vector<SimScene> scenes;
    for (int i = 0; i < 3; ++i) scenes.push_back(generate_scene(100 + i, scfg, spec));
    StrategyConfig strat;
    strat.refine_rule = RefineRule::none;
    TrainerConfig tcfg;
    const TrainedModel m = toy_train(scenes, strat, tcfg, noise, spec, 9);
    CHECK(m.stage1_samples > 0);
    CHECK(m.predictor.train_loss < 1e-3);
    for (int li = 0; li < kNumLevels; ++li)
        for (std::size_t c = 0; c < 34; ++c)
            if (!m.predictor.gain1[li].empty() && m.predictor.gain1[li][c] != 1.0) {
                // untouched coords stay at the default gain 1; fitted ones near 1
                CHECK(std::abs(m.predictor.gain1[li][c] - 1.0) < 0.05);
            }
}

TEST_CASE("toy trainer throws NoPositives on an empty selection") {
    const SkeletonSpec spec = coco_skeleton();
    SceneConfig scfg;
    scfg.min_instances = 0;
    scfg.max_instances = 0;
    std::vector<SimScene> scenes = {generate_scene(1, scfg, spec)};
    StrategyConfig strat;
    CHECK_THROWS_AS(toy_train(scenes, strat, TrainerConfig{}, NoiseModel{}, spec, 1),
                    NoPositives);
}

TEST_CASE("noiseless scoring experiment reaches AP 1 in every mode") {
    const SkeletonSpec spec = coco_skeleton();
    SceneConfig scfg;
    const auto r = run_scoring_experiment(scfg, NoiseModel::noiseless(), 3, 3, spec);
    CHECK(r.cls_only.ap == doctest::Approx(1.0));
    CHECK(r.fused.ap == doctest::Approx(1.0));
    CHECK(r.gt_oks.ap == doctest::Approx(1.0));
}

TEST_CASE("ablation table is byte-identical across job counts") {
    const SkeletonSpec spec = coco_skeleton();
    AblationConfig cfg;
    cfg.strategies = default_ablation_grid();
    cfg.seeds_per_row = 1;
    cfg.trainer.train_scenes = 2;
    cfg.trainer.heldout_scenes = 1;
    const std::string a = ablation_csv(run_strategy_ablation(cfg, spec, 7, 1));
    const std::string b = ablation_csv(run_strategy_ablation(cfg, spec, 7, 4));
    CHECK(a == b);
    CHECK(a.substr(0, a.find('\n')) == "strategy,AP,AP50,AP75,APM,APL,AR");
}

TEST_CASE("empty strategy list yields a header-only CSV") {
    const SkeletonSpec spec = coco_skeleton();
    AblationConfig cfg;
    cfg.strategies.clear();
    const auto rows = run_strategy_ablation(cfg, spec, 1, 1);
    CHECK(ablation_csv(rows) == "strategy,AP,AP50,AP75,APM,APL,AR\n");
}
