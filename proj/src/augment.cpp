#include "dcscan/augment.hpp"

#include <cmath>

namespace dcscan {

namespace {

bool needs_square(Dihedral d) {
    return d == Dihedral::Rot90 || d == Dihedral::Rot270 || d == Dihedral::Transpose ||
           d == Dihedral::AntiTranspose;
}

// out(r,c) = in(mapped r, mapped c); all eight elements preserve extents for
// square inputs, and only the square-preserving ones touch non-square ones.
template <class Get, class Set>
void dihedral_map(std::size_t h, std::size_t w, Dihedral d, Get get, Set set) {
    check_arg(!(needs_square(d) && h != w),
              "augment: rotation/transposition of a non-square image");
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            std::size_t sr = r, sc = c;
            switch (d) {
                case Dihedral::Identity: break;
                case Dihedral::Rot90:          // 90 degrees clockwise
                    sr = h - 1 - c;
                    sc = r;
                    break;
                case Dihedral::Rot180:
                    sr = h - 1 - r;
                    sc = w - 1 - c;
                    break;
                case Dihedral::Rot270:
                    sr = c;
                    sc = w - 1 - r;
                    break;
                case Dihedral::FlipH:
                    sc = w - 1 - c;
                    break;
                case Dihedral::FlipV:
                    sr = h - 1 - r;
                    break;
                case Dihedral::Transpose:
                    sr = c;
                    sc = r;
                    break;
                case Dihedral::AntiTranspose:
                    sr = w - 1 - c;
                    sc = h - 1 - r;
                    break;
            }
            set(r, c, get(sr, sc));
        }
}

void clamp01(std::vector<double>& v) {
    for (double& x : v) x = std::min(1.0, std::max(0.0, x));
}

// Truncated Gaussian, renormalized over in-bounds taps so constants are
// preserved at patch borders. Separable passes.
void gaussian_blur(std::vector<double>& p, std::size_t ph, std::size_t pw, double sigma) {
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> w(radius + 1);
    for (int k = 0; k <= radius; ++k)
        w[k] = std::exp(-0.5 * static_cast<double>(k) * static_cast<double>(k) /
                        (sigma * sigma));
    std::vector<double> tmp(p.size());
    for (std::size_t r = 0; r < ph; ++r)
        for (std::size_t c = 0; c < pw; ++c) {
            double acc = 0.0, norm = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                std::ptrdiff_t cc = static_cast<std::ptrdiff_t>(c) + k;
                if (cc < 0 || cc >= static_cast<std::ptrdiff_t>(pw)) continue;
                double wk = w[std::abs(k)];
                acc += wk * p[r * pw + cc];
                norm += wk;
            }
            tmp[r * pw + c] = acc / norm;
        }
    for (std::size_t r = 0; r < ph; ++r)
        for (std::size_t c = 0; c < pw; ++c) {
            double acc = 0.0, norm = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                std::ptrdiff_t rr = static_cast<std::ptrdiff_t>(r) + k;
                if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(ph)) continue;
                double wk = w[std::abs(k)];
                acc += wk * tmp[rr * pw + c];
                norm += wk;
            }
            p[r * pw + c] = acc / norm;
        }
}

}  // namespace

Tensor apply_dihedral(const Tensor& img, Dihedral d) {
    check_arg(img.rank() == 2, "augment: image must be [H,W]");
    std::size_t h = img.extent(0), w = img.extent(1);
    Tensor out = Tensor::zeros({h, w});
    dihedral_map(
        h, w, d, [&](std::size_t r, std::size_t c) { return img.at(r * w + c); },
        [&](std::size_t r, std::size_t c, double v) { out.data_mut()[r * w + c] = v; });
    return out;
}

IntGrid apply_dihedral(const IntGrid& grid, Dihedral d) {
    check_arg(grid.shape.size() == 2, "augment: label must be [H,W]");
    std::size_t h = grid.shape[0], w = grid.shape[1];
    IntGrid out = IntGrid::zeros({h, w});
    dihedral_map(
        h, w, d, [&](std::size_t r, std::size_t c) { return grid.v[r * w + c]; },
        [&](std::size_t r, std::size_t c, int v) { out.v[r * w + c] = v; });
    return out;
}

std::pair<Tensor, std::optional<IntGrid>> shared_geometric(const Tensor& img,
                                                           const IntGrid* label, Rng& rng) {
    Dihedral d = static_cast<Dihedral>(urand_int(rng, 0, 7));
    std::optional<IntGrid> lab;
    if (label) lab = apply_dihedral(*label, d);
    return {apply_dihedral(img, d), std::move(lab)};
}

void strong_photometric(std::vector<double>& patch, std::size_t ph, std::size_t pw,
                        const AugmentConfig& cfg, Rng& rng) {
    check_arg(patch.size() == ph * pw, "augment: patch buffer size mismatch");
    check_arg(cfg.alpha >= 0.0 && cfg.alpha <= 1.0, "augment: alpha must be in [0,1]");
    check_arg(cfg.blur_sigma_min > 0.0 && cfg.blur_sigma_max >= cfg.blur_sigma_min &&
                  cfg.brightness_delta >= 0.0 && cfg.contrast_min > 0.0 &&
                  cfg.contrast_max >= cfg.contrast_min && cfg.gamma_min > 0.0 &&
                  cfg.gamma_max >= cfg.gamma_min,
              "augment: invalid photometric ranges");

    if (urand01(rng) < cfg.alpha) {
        gaussian_blur(patch, ph, pw, urand_range(rng, cfg.blur_sigma_min, cfg.blur_sigma_max));
        clamp01(patch);
    }
    if (urand01(rng) < cfg.alpha) {
        double delta = urand_range(rng, -cfg.brightness_delta, cfg.brightness_delta);
        for (double& x : patch) x += delta;
        clamp01(patch);
    }
    if (urand01(rng) < cfg.alpha) {
        double f = urand_range(rng, cfg.contrast_min, cfg.contrast_max);
        for (double& x : patch) x = 0.5 + f * (x - 0.5);
        clamp01(patch);
    }
    if (urand01(rng) < cfg.alpha) {
        double g = urand_range(rng, cfg.gamma_min, cfg.gamma_max);
        for (double& x : patch) x = std::pow(x, g);
        clamp01(patch);
    }
}

AugmentedPair mix_augment(const Tensor& img, const IntGrid* label, const AugmentConfig& cfg,
                          Rng& rng) {
    check_arg(img.rank() == 2, "augment: image must be [H,W]");
    std::size_t h = img.extent(0), w = img.extent(1);
    {
        const double* p = img.data();
        bool ok = true;
        for (std::size_t i = 0, n = img.size(); i < n; ++i) ok &= p[i] >= 0.0 && p[i] <= 1.0;
        check_arg(ok, "augment: pixels must be in [0,1]");
    }

    auto [geo, lab] = shared_geometric(img, label, rng);

    std::size_t d = cfg.patch_size;
    if (d == 0) d = static_cast<std::size_t>(urand_int(
                    rng, std::max<std::int64_t>(1, static_cast<std::int64_t>(h / 8)),
                    static_cast<std::int64_t>(h)));
    check_arg(d >= 1 && d <= h && d <= w, "augment: patch size exceeds the image");

    // Last row/column of patches absorb the remainders.
    std::size_t nr = h / d, nc = w / d;
    AugmentedPair out;
    out.geometric = geo;
    out.view_a = geo.detach();
    out.view_b = geo.detach();
    out.strong_in_a = IntGrid::zeros({nr, nc});
    out.label = std::move(lab);

    for (std::size_t pr = 0; pr < nr; ++pr) {
        for (std::size_t pc = 0; pc < nc; ++pc) {
            std::size_t r0 = pr * d, c0 = pc * d;
            std::size_t r1 = pr + 1 == nr ? h : r0 + d;
            std::size_t c1 = pc + 1 == nc ? w : c0 + d;
            std::size_t ph = r1 - r0, pw = c1 - c0;
            std::vector<double> patch(ph * pw);
            for (std::size_t r = 0; r < ph; ++r)
                for (std::size_t c = 0; c < pw; ++c)
                    patch[r * pw + c] = geo.at((r0 + r) * w + c0 + c);
            bool a_strong = urand_coin(rng);
            strong_photometric(patch, ph, pw, cfg, rng);
            Tensor& strong_view = a_strong ? out.view_a : out.view_b;
            out.strong_in_a.v[pr * nc + pc] = a_strong ? 1 : 0;
            for (std::size_t r = 0; r < ph; ++r)
                for (std::size_t c = 0; c < pw; ++c)
                    strong_view.data_mut()[(r0 + r) * w + c0 + c] = patch[r * pw + c];
        }
    }
    return out;
}

}  // namespace dcscan
