#pragma once

#include <optional>
#include <vector>

#include "ctseg/report.hpp"
#include "ctseg/volume.hpp"

namespace ctseg {

// How nearest-surface distances are computed. Accelerated runs an exact
// distance transform over the reference surface's voxel grid and samples it
// at the query voxels; Exhaustive is the O(|Q|*|S|) pairwise scan kept as
// the oracle. Auto picks Accelerated whenever both sets are grid-backed on
// the same grid.
enum class DistancePath { Auto, Accelerated, Exhaustive };

// Shortest Euclidean distance (mm) from each point of q to the set s.
std::vector<double> point_to_set_distances(const SurfacePointSet& q, const SurfacePointSet& s,
                                           DistancePath path = DistancePath::Auto);

// Symmetric Hausdorff distance: max of the two directed maxima.
// literal_sum instead returns the sum of the two directed maxima, matching
// a nonstandard reading some tables use; it is off by default.
double hausdorff(const SurfacePointSet& sr, const SurfacePointSet& sp,
                 DistancePath path = DistancePath::Auto, bool literal_sum = false);

// Average symmetric surface distance: summed nearest distances in both
// directions over the total point count.
double assd(const SurfacePointSet& sr, const SurfacePointSet& sp,
            DistancePath path = DistancePath::Auto);

// Fraction of points of sp lying within theta (inclusive) of sr.
double surface_overlap(const SurfacePointSet& sp, const SurfacePointSet& sr, double theta_mm,
                       DistancePath path = DistancePath::Auto);

// Dice over theta-overlapping surface points of both sets.
double surface_dice(const SurfacePointSet& sr, const SurfacePointSet& sp, double theta_mm,
                    DistancePath path = DistancePath::Auto);

// Overlap metrics as fractions in [0,1]; a field is unset when its
// denominator is zero. wdsc weights the foreground dice with w1 and the
// dice of the complemented masks with w2.
struct OverlapMetrics {
    std::optional<double> dsc;
    std::optional<double> wdsc;
    std::optional<double> iou;
    std::optional<double> sen;
    std::optional<double> ppv;
};

OverlapMetrics overlap_metrics(const Volume& pred, const Volume& ref, double w1 = 0.1,
                               double w2 = 0.9);

struct EvalConfig {
    double threshold = 0.5;
    double theta_mm = 1.0;
    double w1 = 0.1;
    double w2 = 0.9;
    DistancePath path = DistancePath::Auto;
    bool hd_literal_sum = false;
};

// Thresholds the probability map, extracts both surfaces and fills a full
// nine-metric report. Undefined metrics propagate as unset fields.
CaseReport evaluate_case(const Volume& pred_prob, const Volume& ref_label, const EvalConfig& cfg,
                         const std::string& case_id = "case");

}  // namespace ctseg
