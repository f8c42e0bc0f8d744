#include "ctseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ctseg/edt.hpp"

namespace ctseg {
namespace {

std::vector<double> exhaustive_distances(const SurfacePointSet& q, const SurfacePointSet& s) {
    std::vector<double> out;
    out.reserve(q.count());
    for (const auto& p : q.points) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& t : s.points) {
            double dz = p[0] - t[0];
            double dy = p[1] - t[1];
            double dx = p[2] - t[2];
            double d2 = dz * dz + dy * dy + dx * dx;
            if (d2 < best) best = d2;
        }
        out.push_back(std::sqrt(best));
    }
    return out;
}

std::vector<double> grid_distances(const SurfacePointSet& q, const SurfacePointSet& s) {
    std::vector<char> sites(s.grid_dims.voxels(), 0);
    for (const auto& v : s.voxels)
        sites[(static_cast<std::size_t>(v[0]) * s.grid_dims.h + v[1]) * s.grid_dims.w + v[2]] = 1;
    std::vector<double> field = squared_distance_transform(sites, s.grid_dims, s.grid_spacing);

    std::vector<double> out;
    out.reserve(q.count());
    for (const auto& v : q.voxels) {
        std::size_t idx =
            (static_cast<std::size_t>(v[0]) * q.grid_dims.h + v[1]) * q.grid_dims.w + v[2];
        out.push_back(std::sqrt(field[idx]));
    }
    return out;
}

bool same_grid(const SurfacePointSet& a, const SurfacePointSet& b) {
    return a.grid_backed() && b.grid_backed() && a.grid_dims == b.grid_dims &&
           a.grid_spacing == b.grid_spacing;
}

double directed_max(const SurfacePointSet& from, const SurfacePointSet& to, DistancePath path) {
    auto d = point_to_set_distances(from, to, path);
    return *std::max_element(d.begin(), d.end());
}

double directed_sum(const SurfacePointSet& from, const SurfacePointSet& to, DistancePath path) {
    auto d = point_to_set_distances(from, to, path);
    double sum = 0.0;
    for (double v : d) sum += v;
    return sum;
}

std::size_t count_within(const SurfacePointSet& from, const SurfacePointSet& to, double theta,
                         DistancePath path) {
    auto d = point_to_set_distances(from, to, path);
    std::size_t n = 0;
    for (double v : d)
        if (v <= theta) ++n;
    return n;
}

void require_nonempty(const SurfacePointSet& a, const SurfacePointSet& b, const char* op) {
    if (a.empty() || b.empty())
        throw std::invalid_argument(std::string(op) + " is undefined for an empty surface set");
}

}  // namespace

std::vector<double> point_to_set_distances(const SurfacePointSet& q, const SurfacePointSet& s,
                                           DistancePath path) {
    if (s.empty())
        throw std::invalid_argument("point_to_set_distances: reference set is empty");
    if (q.empty()) return {};

    switch (path) {
        case DistancePath::Exhaustive:
            return exhaustive_distances(q, s);
        case DistancePath::Accelerated:
            if (!same_grid(q, s))
                throw std::invalid_argument(
                    "accelerated distances need both sets grid-backed on the same grid");
            return grid_distances(q, s);
        case DistancePath::Auto:
        default:
            return same_grid(q, s) ? grid_distances(q, s) : exhaustive_distances(q, s);
    }
}

double hausdorff(const SurfacePointSet& sr, const SurfacePointSet& sp, DistancePath path,
                 bool literal_sum) {
    require_nonempty(sr, sp, "hausdorff");
    double a = directed_max(sr, sp, path);
    double b = directed_max(sp, sr, path);
    return literal_sum ? a + b : std::max(a, b);
}

double assd(const SurfacePointSet& sr, const SurfacePointSet& sp, DistancePath path) {
    require_nonempty(sr, sp, "assd");
    double total = directed_sum(sr, sp, path) + directed_sum(sp, sr, path);
    return total / static_cast<double>(sr.count() + sp.count());
}

double surface_overlap(const SurfacePointSet& sp, const SurfacePointSet& sr, double theta_mm,
                       DistancePath path) {
    require_nonempty(sp, sr, "surface_overlap");
    if (!(theta_mm > 0)) throw std::invalid_argument("surface_overlap: theta must be positive");
    return static_cast<double>(count_within(sp, sr, theta_mm, path)) /
           static_cast<double>(sp.count());
}

double surface_dice(const SurfacePointSet& sr, const SurfacePointSet& sp, double theta_mm,
                    DistancePath path) {
    require_nonempty(sr, sp, "surface_dice");
    if (!(theta_mm > 0)) throw std::invalid_argument("surface_dice: theta must be positive");
    std::size_t op = count_within(sp, sr, theta_mm, path);
    std::size_t orr = count_within(sr, sp, theta_mm, path);
    return static_cast<double>(op + orr) / static_cast<double>(sp.count() + sr.count());
}

OverlapMetrics overlap_metrics(const Volume& pred, const Volume& ref, double w1, double w2) {
    if (std::abs(w1 + w2 - 1.0) > 1e-9)
        throw std::invalid_argument("overlap weights must satisfy w1 + w2 = 1");
    ConfusionCounts c = confusion_counts(pred, ref);

    auto ratio = [](double num, double den) -> std::optional<double> {
        if (den == 0.0) return std::nullopt;
        return num / den;
    };

    OverlapMetrics m;
    double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    double fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
    m.dsc = ratio(2.0 * tp, 2.0 * tp + fp + fn);
    m.iou = ratio(tp, tp + fp + fn);
    m.sen = ratio(tp, tp + fn);
    m.ppv = ratio(tp, tp + fp);
    // Background dice swaps the roles of foreground and background, so TN
    // becomes the agreement count and FP/FN keep their meaning.
    std::optional<double> bg = ratio(2.0 * tn, 2.0 * tn + fp + fn);
    if (m.dsc && bg) m.wdsc = w1 * *m.dsc + w2 * *bg;
    return m;
}

CaseReport evaluate_case(const Volume& pred_prob, const Volume& ref_label, const EvalConfig& cfg,
                         const std::string& case_id) {
    if (pred_prob.dims != ref_label.dims) {
        std::ostringstream msg;
        msg << "dimension mismatch: pred (" << pred_prob.dims.d << "," << pred_prob.dims.h << ","
            << pred_prob.dims.w << ") vs ref (" << ref_label.dims.d << "," << ref_label.dims.h
            << "," << ref_label.dims.w << ")";
        throw std::invalid_argument(msg.str());
    }
    if (!(pred_prob.spacing == ref_label.spacing))
        throw std::invalid_argument("spacing mismatch between prediction and reference");
    if (std::abs(cfg.w1 + cfg.w2 - 1.0) > 1e-9)
        throw std::invalid_argument("overlap weights must satisfy w1 + w2 = 1");
    if (!(cfg.theta_mm > 0)) throw std::invalid_argument("theta must be positive");

    Volume pred = threshold_prob(pred_prob, cfg.threshold);

    CaseReport r;
    r.case_id = case_id;
    r.theta_mm = cfg.theta_mm;
    r.threshold = cfg.threshold;
    r.w1 = cfg.w1;
    r.w2 = cfg.w2;

    OverlapMetrics m = overlap_metrics(pred, ref_label, cfg.w1, cfg.w2);
    auto pct = [](std::optional<double> v) -> std::optional<double> {
        if (!v) return std::nullopt;
        return *v * 100.0;
    };
    r.dsc = pct(m.dsc);
    r.wdsc = pct(m.wdsc);
    r.iou = pct(m.iou);
    r.sen = pct(m.sen);
    r.ppv = pct(m.ppv);

    SurfacePointSet sp = extract_surface(pred);
    SurfacePointSet sr = extract_surface(ref_label);
    if (!sp.empty() && !sr.empty()) {
        r.hd = hausdorff(sr, sp, cfg.path, cfg.hd_literal_sum);
        r.assd = assd(sr, sp, cfg.path);
        r.so = surface_overlap(sp, sr, cfg.theta_mm, cfg.path) * 100.0;
        r.sd = surface_dice(sr, sp, cfg.theta_mm, cfg.path) * 100.0;
    }
    return r;
}

}  // namespace ctseg
