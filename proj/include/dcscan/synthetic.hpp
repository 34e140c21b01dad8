#pragma once

#include <string>
#include <vector>

#include "dcscan/tensor.hpp"

namespace dcscan {

enum class TargetFamily { VerticalBar, TiltedBar45 };

std::string to_string(TargetFamily f);
TargetFamily family_from_string(const std::string& s);

// Synthetic directional dataset: background plus one oriented bar plus
// clipped Gaussian noise; the label is the exact bar mask.
struct SyntheticSpec {
    std::size_t extent = 32;
    std::size_t num_classes = 2;
    std::size_t n_labeled = 8;
    std::size_t n_unlabeled = 0;
    std::size_t n_test = 16;
    double noise_sigma = 0.05;
    std::size_t thickness_min = 2;
    std::size_t thickness_max = 4;
    std::size_t length_min = 16;   // defaults sized for extent 32
    std::size_t length_max = 32;
    double fg_level = 0.75;
    double bg_level = 0.25;
    std::uint64_t seed = 0;
};

struct Sample {
    Tensor image;    // [H,W] in [0,1]
    IntGrid label;   // [H,W]; empty (v.size()==0) for unlabeled samples on disk
    TargetFamily family = TargetFamily::VerticalBar;
    bool has_label() const { return !label.v.empty(); }
};

struct SplitDataset {
    std::vector<Sample> labeled;
    std::vector<Sample> unlabeled;
    std::vector<Sample> test;
};

// The exact bar mask; bars must fit inside the extent.
IntGrid render_bar(TargetFamily family, std::size_t extent, std::size_t r0, std::size_t c0,
                   std::size_t len, std::size_t thickness);

SplitDataset gen_synthetic(const SyntheticSpec& spec);

// Dataset manifest: `split family image-path label-path|-` per line, paths
// relative to the manifest directory. Images/labels stored as PGM.
void save_dataset(const std::string& dir, const SplitDataset& ds);
SplitDataset load_dataset(const std::string& manifest_path);

}  // namespace dcscan
