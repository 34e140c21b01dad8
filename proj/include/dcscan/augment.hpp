#pragma once

#include <optional>

#include "dcscan/tensor.hpp"

namespace dcscan {

// Patch-level weak-strong mixing augmentation. Geometric transforms (the
// dihedral group of order 8) are shared by both views and the label at the
// whole-image level so the two views stay pixel-aligned; the per-patch mixing
// is photometric only.
struct AugmentConfig {
    std::size_t patch_size = 0;   // 0 = random per call from {H/8 .. H}
    double alpha = 0.9;           // per-transform application probability
    double blur_sigma_min = 0.1;
    double blur_sigma_max = 1.0;
    double brightness_delta = 0.2;   // additive, drawn from [-d, d]
    double contrast_min = 0.8;
    double contrast_max = 1.25;
    double gamma_min = 0.7;
    double gamma_max = 1.5;
};

enum class Dihedral {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    FlipH,
    FlipV,
    Transpose,
    AntiTranspose
};

// Images are [H,W] tensors with values in [0,1]; labels are class-index
// grids of the same extents.
Tensor apply_dihedral(const Tensor& img, Dihedral d);
IntGrid apply_dihedral(const IntGrid& grid, Dihedral d);

// One random dihedral element applied identically to image and label.
// Rotations/transpositions of non-square images are an error.
std::pair<Tensor, std::optional<IntGrid>> shared_geometric(const Tensor& img,
                                                           const IntGrid* label, Rng& rng);

// blur -> brightness -> contrast -> gamma, each applied with probability
// alpha, clamped to [0,1] after every transform. In-place on a patch buffer.
void strong_photometric(std::vector<double>& patch, std::size_t ph, std::size_t pw,
                        const AugmentConfig& cfg, Rng& rng);

struct AugmentedPair {
    Tensor view_a;         // x'  (fed to network A)
    Tensor view_b;         // x'' (fed to network B)
    Tensor geometric;      // the shared weak base both views are built from
    IntGrid strong_in_a;   // per-patch: 1 where view_a holds the strong patch
    std::optional<IntGrid> label;
};

// Split into d x d patches (the last row/column absorbs remainders), flip a
// fair coin per patch for which view receives the strong version.
AugmentedPair mix_augment(const Tensor& img, const IntGrid* label, const AugmentConfig& cfg,
                          Rng& rng);

}  // namespace dcscan
