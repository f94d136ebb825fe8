#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "posekit/assign.hpp"
#include "posekit/rng.hpp"
#include "posekit/skeleton.hpp"

using namespace posekit;

namespace {

GroundTruthInstance box_instance(std::int64_t id, double x0, double y0, double x1, double y1) {
    // two labeled corner keypoints span the requested pseudo-box
    Pose p;
    p.keypoints.assign(17, {x0, y0});
    p.visibility.assign(17, 0);
    p.keypoints[0] = {x0, y0};
    p.keypoints[1] = {x1, y1};
    p.visibility[0] = 2;
    p.visibility[1] = 2;
    return make_instance(p, id);
}

GroundTruthInstance random_instance(Rng& rng, std::int64_t id, double span) {
    Pose p;
    const double cx = rng.uniform(50, 450), cy = rng.uniform(50, 450);
    for (int j = 0; j < 17; ++j) {
        p.keypoints.push_back({cx + rng.uniform(-span, span), cy + rng.uniform(-span, span)});
        p.visibility.push_back(2);
    }
    return make_instance(p, id);
}

}  // namespace

TEST_CASE("level assignment by max pseudo-box side") {
    AssignerConfig cfg;
    CHECK(level_for_max_side(30.0, cfg) == 3);
    CHECK(level_for_max_side(512.0, cfg) == 7);
    CHECK(level_for_max_side(64.0, cfg) == 4);
    CHECK(level_for_max_side(0.0, cfg) == 3);  // degenerate box
}

TEST_CASE("assign_levels partitions instances, verified against range scan") {
    AssignerConfig cfg;
    Rng rng(21);
    std::vector<GroundTruthInstance> instances;
    for (int i = 0; i < 50; ++i) instances.push_back(random_instance(rng, i, rng.uniform(5, 400)));
    const auto by_level = assign_levels(instances, cfg);
    std::set<std::int64_t> seen;
    for (const auto& [level, ids] : by_level) {
        for (auto id : ids) {
            CHECK(!seen.count(id));
            seen.insert(id);
            const auto* gt = find_instance(instances, id);
            const double m = gt->box.max_side();
            // brute-force range scan
            int expect = 7;
            const double edges[4] = {64, 128, 256, 512};
            for (int e = 0; e < 4; ++e)
                if (m < edges[e]) {
                    expect = 3 + e;
                    break;
                }
            CHECK(level == expect);
        }
    }
    CHECK(seen.size() == instances.size());
}

TEST_CASE("location-to-instance containment and smallest-box rule") {
    const GridLocation loc = make_location(3, 3, 3);  // center (28, 28)
    std::vector<GroundTruthInstance> one = {box_instance(7, 20, 20, 40, 40)};
    CHECK(assign_location_to_instance(loc, one) == 7);

    std::vector<GroundTruthInstance> two = {box_instance(1, 18, 18, 28, 38),   // area 200
                                            box_instance(2, 20, 20, 28, 28)};  // area 64
    CHECK(assign_location_to_instance(loc, two) == 2);

    std::vector<GroundTruthInstance> none = {box_instance(3, 100, 100, 200, 200)};
    CHECK(!assign_location_to_instance(loc, none).has_value());
}

TEST_CASE("assignment matches brute-force oracle and ignores input order") {
    Rng rng(22);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<GroundTruthInstance> instances;
        for (int i = 0; i < 8; ++i) instances.push_back(random_instance(rng, i, rng.uniform(10, 120)));
        const GridLocation loc = make_location(3, static_cast<int>(rng.uniform_index(60)),
                                               static_cast<int>(rng.uniform_index(60)));
        // oracle: all containing boxes, argmin area, argmin id
        std::optional<std::int64_t> expect;
        double best_area = 1e300;
        for (const auto& gt : instances) {
            if (!gt.box.contains(loc.x_c, loc.y_c)) continue;
            if (gt.box.area() < best_area ||
                (gt.box.area() == best_area && (!expect || gt.id < *expect))) {
                best_area = gt.box.area();
                expect = gt.id;
            }
        }
        CHECK(assign_location_to_instance(loc, instances) == expect);
        std::vector<GroundTruthInstance> reversed(instances.rbegin(), instances.rend());
        CHECK(assign_location_to_instance(loc, reversed) == expect);
    }
}

TEST_CASE("initial positive requires the shrunk square") {
    AssignerConfig cfg;  // level-3 shrunk side 12, half-side 6
    const GroundTruthInstance gt = box_instance(0, 0, 0, 56, 56);  // center (28,28)
    GridLocation center = make_location(3, 0, 0);
    center.x_c = 28.0;
    center.y_c = 28.0;
    CHECK(is_initial_positive(center, gt, cfg));

    GridLocation off = center;
    off.x_c = 28.0 + 7.0;  // 7 px > half-side 6
    CHECK(!is_initial_positive(off, gt, cfg));

    off.x_c = 28.0 + 5.0;
    CHECK(is_initial_positive(off, gt, cfg));
}

TEST_CASE("initial positives equal brute-force scan and are a subset of full-box") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<GroundTruthInstance> instances;
        for (int i = 0; i < 5; ++i) instances.push_back(random_instance(rng, i, rng.uniform(10, 200)));
        std::vector<GridLocation> locs;
        for (int level = 3; level <= 7; ++level) {
            auto l = grid_locations(level, 512, 512);
            locs.insert(locs.end(), l.begin(), l.end());
        }
        AssignerConfig shrunk;
        AssignerConfig full;
        full.full_box_positives = true;
        const auto ps = initial_positives(locs, instances, shrunk);
        const auto pf = initial_positives(locs, instances, full);

        // brute-force count of the shrunk rule
        std::size_t count = 0;
        for (const auto& loc : locs) {
            std::vector<GroundTruthInstance> lvl;
            for (const auto& gt : instances)
                if (level_for_max_side(gt.box.max_side(), shrunk) == loc.level) lvl.push_back(gt);
            auto id = assign_location_to_instance(loc, lvl);
            if (!id) continue;
            const auto* gt = find_instance(instances, *id);
            const Point c = gt->box.center();
            const double half = 0.5 * shrunk.shrunk_sides[loc.level - 3];
            if (std::abs(loc.x_c - c.x) <= half && std::abs(loc.y_c - c.y) <= half &&
                gt->box.contains(loc.x_c, loc.y_c))
                ++count;
        }
        CHECK(ps.size() == count);
        CHECK(ps.size() <= pf.size());

        // shrunk positives are a subset of full-box positives
        auto key = [](const PositivePair& p) {
            return std::tuple(p.location.level, p.location.ix, p.location.iy, p.instance_id);
        };
        std::set<std::tuple<int, int, int, std::int64_t>> full_set;
        for (const auto& p : pf) full_set.insert(key(p));
        for (const auto& p : ps) CHECK(full_set.count(key(p)));
    }
}

namespace {

AssignedHypothesis make_assigned(const GroundTruthInstance& gt, const GridLocation& loc,
                                 double error_px) {
    AssignedHypothesis ah;
    ah.hypothesis.location = loc;
    for (std::size_t j = 0; j < gt.pose.size(); ++j) {
        ah.hypothesis.offsets1.push_back({gt.pose.keypoints[j].x - loc.x_c + error_px,
                                          gt.pose.keypoints[j].y - loc.y_c});
        ah.hypothesis.offsets2.push_back({0, 0});
    }
    ah.instance_id = gt.id;
    return ah;
}

}  // namespace

TEST_CASE("refinement positives threshold behavior") {
    const SkeletonSpec spec = coco_skeleton();
    Rng rng(24);
    const GroundTruthInstance gt = random_instance(rng, 0, 80);
    const GridLocation loc = make_location(3, 10, 10);
    AssignerConfig cfg;

    // exact pose is positive at any threshold <= 1
    std::vector<AssignedHypothesis> hyps = {make_assigned(gt, loc, 0.0)};
    cfg.refine_oks_threshold = 1.0;
    CHECK(refinement_positives(hyps, {gt}, cfg, spec).size() == 1);

    // push OKS just below 0.5 and check exclusion, oracle-filtered
    cfg.refine_oks_threshold = 0.5;
    for (double err = 1.0; err < 400.0; err *= 1.3) {
        std::vector<AssignedHypothesis> h2 = {make_assigned(gt, loc, err)};
        const double oks = compute_oks(decode_refined(h2[0].hypothesis), gt.pose,
                                       OksScale::from_instance(gt), spec);
        const auto pos = refinement_positives(h2, {gt}, cfg, spec);
        CHECK(pos.size() == (oks >= 0.5 ? 1u : 0u));
    }
}

TEST_CASE("raising the refine threshold never enlarges the positive set") {
    const SkeletonSpec spec = coco_skeleton();
    Rng rng(25);
    const GroundTruthInstance gt = random_instance(rng, 0, 80);
    std::vector<AssignedHypothesis> hyps;
    for (int i = 0; i < 200; ++i) {
        AssignedHypothesis ah = make_assigned(gt, make_location(3, i % 20, i / 20),
                                              rng.uniform(0, 120));
        hyps.push_back(ah);
    }
    AssignerConfig cfg;
    std::size_t prev = hyps.size() + 1;
    for (double thr : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        cfg.refine_oks_threshold = thr;
        const std::size_t n = refinement_positives(hyps, {gt}, cfg, spec).size();
        CHECK(n <= prev);
        prev = n;
    }
}

TEST_CASE("psm targets are oracle OKS for assigned, zero for background") {
    const SkeletonSpec spec = coco_skeleton();
    Rng rng(26);
    const GroundTruthInstance gt = random_instance(rng, 0, 60);
    const GridLocation loc = make_location(3, 5, 5);

    std::vector<AssignedHypothesis> hyps = {make_assigned(gt, loc, 0.0),
                                            make_assigned(gt, loc, 25.0)};
    hyps.push_back({});  // background
    hyps[2].hypothesis.location = loc;
    hyps[2].hypothesis.offsets1.assign(17, {0, 0});
    hyps[2].hypothesis.offsets2.assign(17, {0, 0});

    const auto targets = psm_targets(hyps, {gt}, spec);
    REQUIRE(targets.size() == 3);
    CHECK(targets[0] == doctest::Approx(1.0).epsilon(1e-12));
    const double expect = compute_oks(decode_refined(hyps[1].hypothesis), gt.pose,
                                      OksScale::from_instance(gt), spec);
    CHECK(targets[1] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(targets[2] == 0.0);
    for (double t : targets) {
        CHECK(t >= 0.0);
        CHECK(t <= 1.0);
    }
}

TEST_CASE("assigner config validation") {
    AssignerConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.refine_oks_threshold = 1.5;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
}
