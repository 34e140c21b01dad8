#include "dcscan/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace dcscan {

OverlapReport overlap_metrics(const IntGrid& pred, const IntGrid& gt,
                              std::size_t num_classes) {
    check_arg(pred.shape == gt.shape, "overlap: prediction and truth shapes differ");
    check_arg(num_classes >= 2, "overlap: need at least two classes");
    std::size_t n = gt.size();
    check_arg(n > 0, "overlap: empty masks");
    {
        bool ok = true;
        for (std::size_t i = 0; i < n; ++i)
            ok &= pred.v[i] >= 0 && static_cast<std::size_t>(pred.v[i]) < num_classes &&
                  gt.v[i] >= 0 && static_cast<std::size_t>(gt.v[i]) < num_classes;
        check_arg(ok, "overlap: class index out of range");
    }

    OverlapReport rep;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (pred.v[i] == gt.v[i]) ++correct;
    rep.acc = static_cast<double>(correct) / static_cast<double>(n);

    double dice_sum = 0.0, iou_sum = 0.0, sen_sum = 0.0, spe_sum = 0.0;
    std::size_t sen_n = 0, spe_n = 0;
    for (std::size_t c = 1; c < num_classes; ++c) {
        ClassOverlap co;
        for (std::size_t i = 0; i < n; ++i) {
            bool p = pred.v[i] == static_cast<int>(c);
            bool g = gt.v[i] == static_cast<int>(c);
            if (p && g)
                ++co.tp;
            else if (p && !g)
                ++co.fp;
            else if (!p && g)
                ++co.fn;
            else
                ++co.tn;
        }
        std::size_t dice_den = 2 * co.tp + co.fp + co.fn;
        co.dice = dice_den == 0 ? 1.0 : 2.0 * static_cast<double>(co.tp) /
                                            static_cast<double>(dice_den);
        std::size_t iou_den = co.tp + co.fp + co.fn;
        co.iou = iou_den == 0 ? 1.0
                              : static_cast<double>(co.tp) / static_cast<double>(iou_den);
        if (co.tp + co.fn > 0)
            co.sen = static_cast<double>(co.tp) / static_cast<double>(co.tp + co.fn);
        if (co.tn + co.fp > 0)
            co.spe = static_cast<double>(co.tn) / static_cast<double>(co.tn + co.fp);
        dice_sum += co.dice;
        iou_sum += co.iou;
        if (co.sen) {
            sen_sum += *co.sen;
            ++sen_n;
        }
        if (co.spe) {
            spe_sum += *co.spe;
            ++spe_n;
        }
        rep.per_class.push_back(co);
    }
    double fg = static_cast<double>(num_classes - 1);
    rep.mean_dice = dice_sum / fg;
    rep.mean_iou = iou_sum / fg;
    if (sen_n) rep.mean_sen = sen_sum / static_cast<double>(sen_n);
    if (spe_n) rep.mean_spe = spe_sum / static_cast<double>(spe_n);
    return rep;
}

std::vector<std::pair<std::size_t, std::size_t>> boundary_pixels(const IntGrid& mask) {
    check_arg(mask.shape.size() == 2, "surface: mask must be [H,W]");
    std::size_t h = mask.shape[0], w = mask.shape[1];
    std::vector<std::pair<std::size_t, std::size_t>> out;
    auto bg = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
        if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(h) ||
            c >= static_cast<std::ptrdiff_t>(w))
            return true;   // border counts as background
        return mask.v[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)] == 0;
    };
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            if (mask.v[r * w + c] == 0) continue;
            std::ptrdiff_t ri = static_cast<std::ptrdiff_t>(r);
            std::ptrdiff_t ci = static_cast<std::ptrdiff_t>(c);
            if (bg(ri - 1, ci) || bg(ri + 1, ci) || bg(ri, ci - 1) || bg(ri, ci + 1))
                out.emplace_back(r, c);
        }
    return out;
}

namespace {

// Exact nearest-boundary Euclidean distances from every pixel of `from`.
std::vector<double> directed_distances(
    const std::vector<std::pair<std::size_t, std::size_t>>& from,
    const std::vector<std::pair<std::size_t, std::size_t>>& to) {
    std::vector<double> out;
    out.reserve(from.size());
    for (auto& [r, c] : from) {
        double best = std::numeric_limits<double>::infinity();
        for (auto& [tr, tc] : to) {
            double dr = static_cast<double>(r) - static_cast<double>(tr);
            double dc = static_cast<double>(c) - static_cast<double>(tc);
            best = std::min(best, dr * dr + dc * dc);
        }
        out.push_back(std::sqrt(best));
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Linear-interpolation percentile of a sorted copy.
double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    double rank = q * static_cast<double>(v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(rank);
    double frac = rank - static_cast<double>(lo);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

}  // namespace

std::optional<SurfaceMetrics> surface_metrics(const IntGrid& pred_mask,
                                              const IntGrid& gt_mask) {
    check_arg(pred_mask.shape == gt_mask.shape, "surface: mask shapes differ");
    auto bp = boundary_pixels(pred_mask);
    auto bg = boundary_pixels(gt_mask);
    if (bp.empty() && bg.empty()) return SurfaceMetrics{0.0, 0.0};
    if (bp.empty() || bg.empty()) return std::nullopt;   // undefined surface distance
    std::vector<double> p2g = directed_distances(bp, bg);
    std::vector<double> g2p = directed_distances(bg, bp);
    SurfaceMetrics m;
    m.asd = 0.5 * (mean_of(p2g) + mean_of(g2p));
    m.hd95 = std::max(percentile(p2g, 0.95), percentile(g2p, 0.95));
    return m;
}

}  // namespace dcscan
