#pragma once

#include <array>

#include "dcscan/ops.hpp"

namespace dcscan {

// Gaussian warm-up for the cross-supervision weight:
// lambda(t) = peak * exp(-5 (1 - t/t_max)^2), strictly increasing to `peak`.
struct ScheduleConfig {
    std::size_t t_max = 2000;
    double peak = 0.1;
};

struct ContrastiveConfig {
    double temperature = 0.5;
    // Standard noise-contrastive convention keeps the positive pair in the
    // denominator (loss >= 0). The literal printed form sums negatives only
    // and can go negative.
    bool positive_in_denominator = true;
    bool symmetric = false;
};

Tensor one_hot(const IntGrid& labels, std::size_t num_classes);

// 1 - mean over foreground classes of (2 sum(p g) + eps)/(sum p + sum g + eps),
// eps = 1e-5. Expects softmax probabilities.
Tensor dice_loss(const Tensor& probs, const Tensor& target_onehot);

// Mean over pixels of -log softmax(logits)[target].
Tensor ce_loss(const Tensor& logits, const IntGrid& target);

// Logistic of the per-location route variance (channel-averaged), one weight
// per spatial location: w = sigmoid(mean_c (1/K) sum_k (z_k - zbar)^2).
// w is in [0.5, 1) and equals 0.5 exactly where all routes agree.
Tensor uncertainty_weights(const std::array<Tensor, 4>& route_feats);

// h = (sum_k z_k) .* w, w broadcast over channels.
Tensor fuse_features(const std::array<Tensor, 4>& route_feats, const Tensor& w);

// InfoNCE between paired projections: positives are the same image across the
// two networks, negatives the rest of the batch. proj_a/proj_b: [m, dim],
// m >= 2 (a single image has no negatives).
Tensor contrastive_loss(const Tensor& proj_a, const Tensor& proj_b,
                        const ContrastiveConfig& cfg);

// Per-pixel argmax over the last axis, lowest index on ties. Never carries
// gradients: the pseudo-label path is stop-gradient by construction.
IntGrid pseudo_label(const Tensor& logits);

// 0.5 (dice+ce)(a, y) + 0.5 (dice+ce)(b, y)
Tensor supervised_loss(const Tensor& logits_a, const Tensor& logits_b, const IntGrid& label);

// 0.5 (dice+ce)(a, argmax b) + 0.5 (dice+ce)(b, argmax a), pseudo-labels
// gradient-stopped.
Tensor cross_supervision_loss(const Tensor& logits_a, const Tensor& logits_b);

double lambda_schedule(std::size_t t, const ScheduleConfig& cfg);

// sup + lambda(t) * unsup + dfc
Tensor total_loss(const Tensor& sup, const Tensor& unsup, const Tensor& dfc, std::size_t t,
                  const ScheduleConfig& cfg);

}  // namespace dcscan
