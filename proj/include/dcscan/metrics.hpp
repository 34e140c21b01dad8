#pragma once

#include <optional>
#include <vector>

#include "dcscan/tensor.hpp"

namespace dcscan {

// Confusion-matrix metrics. Division-by-zero cells become empty optionals,
// never NaN; a class absent from both prediction and truth scores Dice 1 and
// IoU 1. Aggregates average the defined per-class values over foreground
// classes only.
struct ClassOverlap {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double dice = 0.0;                  // always defined (both-empty -> 1)
    double iou = 0.0;                   // always defined (both-empty -> 1)
    std::optional<double> sen, spe;
};

struct OverlapReport {
    std::vector<ClassOverlap> per_class;   // foreground classes 1..cls-1
    double acc = 0.0;
    double mean_dice = 0.0;
    double mean_iou = 0.0;
    std::optional<double> mean_sen, mean_spe;
};

OverlapReport overlap_metrics(const IntGrid& pred, const IntGrid& gt, std::size_t num_classes);

// Boundary-distance metrics over binary masks. Boundary = foreground pixel
// with a background 4-neighbor, the image border counting as background.
// ASD = mean of the two directed mean distances; 95HD = max of the two
// directed 95th percentiles (linear-interpolation percentile).
// Both boundaries empty -> {0, 0}; exactly one empty -> nullopt
// ("undefined surface distance").
struct SurfaceMetrics {
    double asd = 0.0;
    double hd95 = 0.0;
};

std::optional<SurfaceMetrics> surface_metrics(const IntGrid& pred_mask, const IntGrid& gt_mask);

// Boundary pixels under the convention above (exposed for inspection).
std::vector<std::pair<std::size_t, std::size_t>> boundary_pixels(const IntGrid& mask);

}  // namespace dcscan
