#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "posekit/error.hpp"
#include "posekit/oks.hpp"
#include "posekit/pose.hpp"
#include "posekit/skeleton.hpp"

namespace posekit {

struct GtImage {
    std::int64_t id = 0;
    double width = 0.0, height = 0.0;
};

struct GtAnnotation {
    std::int64_t id = 0;
    std::int64_t image_id = 0;
    std::vector<double> keypoints;  // 3K flat: x, y, v
    double area = -1.0;             // < 0 means unset
    bool iscrowd = false;
};

struct GtDataset {
    std::vector<GtImage> images;
    std::vector<GtAnnotation> annotations;
};

struct ResultEntry {
    std::int64_t image_id = 0;
    std::vector<double> keypoints;
    double score = 0.0;
};

struct ResultSet {
    std::vector<ResultEntry> results;
};

struct EvalResult {
    double ap = -1.0;
    double ap50 = -1.0;
    double ap75 = -1.0;
    double ap_medium = -1.0;
    double ap_large = -1.0;
    double ar = -1.0;
};

inline Pose pose_from_flat(const std::vector<double>& kp) {
    Pose p;
    const std::size_t k = kp.size() / 3;
    p.keypoints.reserve(k);
    p.visibility.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        p.keypoints.push_back({kp[3 * i], kp[3 * i + 1]});
        p.visibility.push_back(static_cast<int>(kp[3 * i + 2]));
    }
    return p;
}

namespace detail {

inline nlohmann::json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string(e.what()));
    }
    return j;
}

inline void check_keypoints_length(const std::vector<double>& kp, std::size_t k) {
    if (kp.size() != 3 * k)
        throw LengthError("keypoints array has length " + std::to_string(kp.size()) +
                          ", expected " + std::to_string(3 * k));
}

template <typename T>
T require(const nlohmann::json& j, const char* field) {
    if (!j.contains(field)) throw SchemaError(std::string("missing field '") + field + "'");
    try {
        return j.at(field).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw SchemaError(std::string("field '") + field + "' has wrong type");
    }
}

}  // namespace detail

inline GtDataset load_gt_json(const nlohmann::json& j, const SkeletonSpec& spec) {
    GtDataset ds;
    if (!j.is_object()) throw SchemaError("annotations file must be an object");
    for (const auto& ji : detail::require<nlohmann::json>(j, "images")) {
        GtImage img;
        img.id = detail::require<std::int64_t>(ji, "id");
        img.width = detail::require<double>(ji, "width");
        img.height = detail::require<double>(ji, "height");
        ds.images.push_back(img);
    }
    std::map<std::int64_t, int> seen;
    for (const auto& img : ds.images)
        if (++seen[img.id] > 1) throw SchemaError("duplicate image id");
    std::map<std::int64_t, int> seen_ann;
    for (const auto& ja : detail::require<nlohmann::json>(j, "annotations")) {
        GtAnnotation a;
        a.id = detail::require<std::int64_t>(ja, "id");
        a.image_id = detail::require<std::int64_t>(ja, "image_id");
        a.keypoints = detail::require<std::vector<double>>(ja, "keypoints");
        detail::check_keypoints_length(a.keypoints, spec.k);
        if (ja.contains("area")) a.area = ja.at("area").get<double>();
        if (ja.contains("iscrowd")) a.iscrowd = ja.at("iscrowd").get<int>() != 0;
        if (++seen_ann[a.id] > 1) throw SchemaError("duplicate annotation id");
        ds.annotations.push_back(a);
    }
    return ds;
}

inline GtDataset load_gt(const std::string& path, const SkeletonSpec& spec) {
    return load_gt_json(detail::parse_json_file(path), spec);
}

inline ResultSet load_results_json(const nlohmann::json& j, const SkeletonSpec& spec) {
    ResultSet rs;
    if (!j.is_array()) throw SchemaError("results file must be an array");
    for (const auto& jr : j) {
        ResultEntry r;
        r.image_id = detail::require<std::int64_t>(jr, "image_id");
        r.keypoints = detail::require<std::vector<double>>(jr, "keypoints");
        detail::check_keypoints_length(r.keypoints, spec.k);
        r.score = detail::require<double>(jr, "score");
        rs.results.push_back(r);
    }
    return rs;
}

inline ResultSet load_results(const std::string& path, const SkeletonSpec& spec) {
    return load_results_json(detail::parse_json_file(path), spec);
}

inline nlohmann::json gt_to_json(const GtDataset& ds) {
    nlohmann::json j;
    j["images"] = nlohmann::json::array();
    for (const auto& img : ds.images)
        j["images"].push_back({{"id", img.id}, {"width", img.width}, {"height", img.height}});
    j["annotations"] = nlohmann::json::array();
    for (const auto& a : ds.annotations) {
        nlohmann::json ja = {{"id", a.id},
                             {"image_id", a.image_id},
                             {"keypoints", a.keypoints},
                             {"iscrowd", a.iscrowd ? 1 : 0}};
        if (a.area > 0.0) ja["area"] = a.area;
        j["annotations"].push_back(ja);
    }
    return j;
}

inline nlohmann::json results_to_json(const ResultSet& rs) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rs.results)
        j.push_back({{"image_id", r.image_id}, {"keypoints", r.keypoints}, {"score", r.score}});
    return j;
}

namespace detail {

struct AreaRange {
    double lo, hi;
};

inline double annotation_scale_sq(const GtAnnotation& a) {
    if (a.area > 0.0) return a.area;
    const Pose p = pose_from_flat(a.keypoints);
    if (p.labeled_count() == 0) return 1.0;
    double s = pseudo_box(p).area() * kBoxAreaToScale;
    return s > 0.0 ? s : 1.0;
}

inline double annotation_area(const GtAnnotation& a) {
    if (a.area > 0.0) return a.area;
    const Pose p = pose_from_flat(a.keypoints);
    if (p.labeled_count() == 0) return 0.0;
    return pseudo_box(p).area();
}

// detection extent over all keypoints, used only for area bucketing
inline double result_area(const ResultEntry& r) {
    const Pose p = pose_from_flat(r.keypoints);
    double xmin = p.keypoints[0].x, xmax = xmin, ymin = p.keypoints[0].y, ymax = ymin;
    for (const Point& q : p.keypoints) {
        xmin = std::min(xmin, q.x);
        xmax = std::max(xmax, q.x);
        ymin = std::min(ymin, q.y);
        ymax = std::max(ymax, q.y);
    }
    return (xmax - xmin) * (ymax - ymin);
}

struct ScoredFlag {
    double score;
    std::size_t order;  // global tie-break: image order then per-image rank
    bool tp;
    bool ignore;
};

}  // namespace detail

/// OKS-based AP/AR over thresholds 0.50:0.05:0.95 following the public COCO
/// keypoint protocol: greedy highest-OKS matching per threshold, 101-point
/// interpolated precision, medium/large buckets at 32^2 and 96^2, and a
/// 100-detection per-image cap. Crowd GT act as ignore regions.
inline EvalResult evaluate(const GtDataset& gt, const ResultSet& res, const SkeletonSpec& spec,
                           std::size_t max_detections = 100) {
    constexpr int kNumThr = 10;
    std::vector<double> thrs(kNumThr);
    for (int t = 0; t < kNumThr; ++t) thrs[t] = 0.50 + 0.05 * t;
    const detail::AreaRange ranges[3] = {
        {0.0, 1e10}, {32.0 * 32.0, 96.0 * 96.0}, {96.0 * 96.0, 1e10}};

    // group by image, preserving id order for deterministic accumulation
    std::vector<GtImage> images = gt.images;
    std::sort(images.begin(), images.end(),
              [](const GtImage& a, const GtImage& b) { return a.id < b.id; });
    std::map<std::int64_t, std::vector<const GtAnnotation*>> gts_by_image;
    for (const auto& a : gt.annotations) gts_by_image[a.image_id].push_back(&a);
    std::map<std::int64_t, std::vector<const ResultEntry*>> dts_by_image;
    {
        std::map<std::int64_t, bool> known;
        for (const auto& img : gt.images) known[img.id] = true;
        for (const auto& r : res.results) {
            if (!known.count(r.image_id)) throw UnknownImageId(r.image_id);
            dts_by_image[r.image_id].push_back(&r);
        }
    }

    // tp/fp flags per (threshold, area range), plus non-ignored GT counts
    std::vector<detail::ScoredFlag> flags[kNumThr][3];
    std::size_t npig[3] = {0, 0, 0};
    std::size_t global_order = 0;

    for (const auto& img : images) {
        auto git = gts_by_image.find(img.id);
        auto dit = dts_by_image.find(img.id);
        std::vector<const GtAnnotation*> g =
            git == gts_by_image.end() ? std::vector<const GtAnnotation*>{} : git->second;
        std::vector<const ResultEntry*> d =
            dit == dts_by_image.end() ? std::vector<const ResultEntry*>{} : dit->second;

        // score-descending, stable so equal scores keep input order
        std::stable_sort(d.begin(), d.end(), [](const ResultEntry* a, const ResultEntry* b) {
            return a->score > b->score;
        });
        if (d.size() > max_detections) d.resize(max_detections);

        // OKS matrix dt x gt
        std::vector<Pose> gposes;
        std::vector<double> gscale, garea;
        std::vector<bool> gvalid;
        for (const auto* a : g) {
            Pose p = pose_from_flat(a->keypoints);
            gvalid.push_back(p.labeled_count() > 0);
            gscale.push_back(detail::annotation_scale_sq(*a));
            garea.push_back(detail::annotation_area(*a));
            gposes.push_back(std::move(p));
        }
        std::vector<std::vector<double>> oks(d.size(), std::vector<double>(g.size(), 0.0));
        for (std::size_t di = 0; di < d.size(); ++di) {
            const Pose dp = pose_from_flat(d[di]->keypoints);
            for (std::size_t gi = 0; gi < g.size(); ++gi)
                if (gvalid[gi])
                    oks[di][gi] = compute_oks(dp, gposes[gi], OksScale{gscale[gi]}, spec);
        }

        for (int ri = 0; ri < 3; ++ri) {
            const auto& rng = ranges[ri];
            std::vector<bool> gignore(g.size());
            for (std::size_t gi = 0; gi < g.size(); ++gi)
                gignore[gi] = g[gi]->iscrowd || !gvalid[gi] || garea[gi] < rng.lo ||
                              garea[gi] >= rng.hi;
            // non-ignored GT first, stable within each class
            std::vector<std::size_t> gord(g.size());
            for (std::size_t gi = 0; gi < g.size(); ++gi) gord[gi] = gi;
            std::stable_sort(gord.begin(), gord.end(), [&](std::size_t a, std::size_t b) {
                return static_cast<int>(gignore[a]) < static_cast<int>(gignore[b]);
            });
            std::size_t n_nonignored = 0;
            for (std::size_t gi = 0; gi < g.size(); ++gi) n_nonignored += !gignore[gi];
            npig[ri] += n_nonignored;

            for (int ti = 0; ti < kNumThr; ++ti) {
                std::vector<int> gtm(g.size(), -1);
                for (std::size_t di = 0; di < d.size(); ++di) {
                    double best = std::min(thrs[ti], 1.0 - 1e-10);
                    int m = -1;
                    for (std::size_t oi = 0; oi < gord.size(); ++oi) {
                        const std::size_t gi = gord[oi];
                        if (gtm[gi] >= 0 && !g[gi]->iscrowd) continue;
                        // past all non-ignored candidates with a match in hand
                        if (m >= 0 && !gignore[static_cast<std::size_t>(m)] && gignore[gi]) break;
                        if (oks[di][gi] < best) continue;
                        best = oks[di][gi];
                        m = static_cast<int>(gi);
                    }
                    bool tp = false, ignore_dt = false;
                    if (m >= 0) {
                        gtm[static_cast<std::size_t>(m)] = static_cast<int>(di);
                        ignore_dt = gignore[static_cast<std::size_t>(m)];
                        tp = !ignore_dt;
                    } else {
                        const double da = detail::result_area(*d[di]);
                        ignore_dt = da < rng.lo || da >= rng.hi;
                    }
                    flags[ti][ri].push_back(
                        {d[di]->score, global_order + di, tp, ignore_dt});
                }
            }
        }
        global_order += d.size();
    }

    // accumulate PR curves
    auto ap_for = [&](int ti, int ri) -> double {
        if (npig[ri] == 0) return -1.0;
        auto fl = flags[ti][ri];
        std::stable_sort(fl.begin(), fl.end(), [](const detail::ScoredFlag& a,
                                                  const detail::ScoredFlag& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.order < b.order;
        });
        std::vector<double> precision, recall;
        double tp = 0, fp = 0;
        for (const auto& f : fl) {
            if (f.ignore) continue;
            if (f.tp)
                ++tp;
            else
                ++fp;
            precision.push_back(tp / (tp + fp));
            recall.push_back(tp / static_cast<double>(npig[ri]));
        }
        // monotone from the right
        for (std::size_t i = precision.size(); i-- > 1;)
            precision[i - 1] = std::max(precision[i - 1], precision[i]);
        double sum = 0.0;
        for (int q = 0; q <= 100; ++q) {
            const double r = q / 100.0;
            auto it = std::lower_bound(recall.begin(), recall.end(), r);
            if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
        }
        return sum / 101.0;
    };
    auto recall_for = [&](int ti, int ri) -> double {
        if (npig[ri] == 0) return -1.0;
        double tp = 0;
        for (const auto& f : flags[ti][ri])
            if (!f.ignore && f.tp) ++tp;
        return tp / static_cast<double>(npig[ri]);
    };
    auto mean_valid = [](const std::vector<double>& v) -> double {
        double sum = 0.0;
        int n = 0;
        for (double x : v)
            if (x >= 0.0) {
                sum += x;
                ++n;
            }
        return n == 0 ? -1.0 : sum / n;
    };

    EvalResult out;
    std::vector<double> ap_all, ap_med, ap_lrg, rc_all;
    for (int ti = 0; ti < kNumThr; ++ti) {
        ap_all.push_back(ap_for(ti, 0));
        ap_med.push_back(ap_for(ti, 1));
        ap_lrg.push_back(ap_for(ti, 2));
        rc_all.push_back(recall_for(ti, 0));
    }
    out.ap = mean_valid(ap_all);
    out.ap50 = ap_all[0];
    out.ap75 = ap_all[5];
    out.ap_medium = mean_valid(ap_med);
    out.ap_large = mean_valid(ap_lrg);
    out.ar = mean_valid(rc_all);
    return out;
}

}  // namespace posekit
