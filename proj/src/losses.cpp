#include "dcscan/losses.hpp"

#include <cmath>

namespace dcscan {

namespace {
constexpr double kDiceEps = 1e-5;
}

Tensor one_hot(const IntGrid& labels, std::size_t num_classes) {
    check_arg(num_classes >= 2, "one_hot: need at least two classes");
    Shape shape = labels.shape;
    shape.push_back(num_classes);
    Tensor out = Tensor::zeros(shape);
    bool ok = true;
    for (int c : labels.v) ok &= c >= 0 && static_cast<std::size_t>(c) < num_classes;
    check_arg(ok, "one_hot: class index out of range");
    for (std::size_t i = 0; i < labels.size(); ++i)
        out.data_mut()[i * num_classes + static_cast<std::size_t>(labels.v[i])] = 1.0;
    return out;
}

Tensor dice_loss(const Tensor& probs, const Tensor& target_onehot) {
    check_arg(probs.shape() == target_onehot.shape(),
              "dice: prediction and target shapes differ, " + shape_str(probs.shape()) +
                  " vs " + shape_str(target_onehot.shape()));
    std::size_t cls = probs.shape().back();
    check_arg(cls >= 2, "dice: need at least two classes");
    Tensor acc;
    for (std::size_t c = 1; c < cls; ++c) {
        Tensor p = channel_at(probs, c);
        Tensor g = channel_at(target_onehot, c);
        Tensor dice = div(add(mul(sum(mul(p, g)), 2.0), kDiceEps),
                          add(add(sum(p), sum(g)), kDiceEps));
        acc = c == 1 ? dice : add(acc, dice);
    }
    return sub(1.0, div(acc, static_cast<double>(cls - 1)));
}

Tensor ce_loss(const Tensor& logits, const IntGrid& target) {
    check_arg(logits.rank() >= 2, "ce: logits must carry a class axis");
    std::size_t cls = logits.shape().back();
    check_arg(target.size() == logits.size() / cls, "ce: target count does not match pixels");
    Tensor lsm = log_softmax_lastaxis(logits);
    return neg(mean(gather_lastaxis(lsm, target)));
}

Tensor uncertainty_weights(const std::array<Tensor, 4>& route_feats) {
    for (std::size_t k = 1; k < 4; ++k)
        check_arg(route_feats[k].shape() == route_feats[0].shape(),
                  "uncertainty: route features must share one shape");
    Tensor zbar = div(add(add(route_feats[0], route_feats[1]),
                          add(route_feats[2], route_feats[3])),
                      4.0);
    Tensor var;
    for (std::size_t k = 0; k < 4; ++k) {
        Tensor d = sub(route_feats[k], zbar);
        Tensor sq = mul(d, d);
        var = k == 0 ? sq : add(var, sq);
    }
    var = div(var, 4.0);
    std::size_t last = route_feats[0].rank() - 1;
    return sigmoid(mean(var, {last}, /*keepdim=*/true));
}

Tensor fuse_features(const std::array<Tensor, 4>& route_feats, const Tensor& w) {
    Tensor s = add(add(route_feats[0], route_feats[1]), add(route_feats[2], route_feats[3]));
    return mul(s, w);
}

Tensor contrastive_loss(const Tensor& proj_a, const Tensor& proj_b,
                        const ContrastiveConfig& cfg) {
    check_arg(cfg.temperature > 0.0, "contrastive: temperature must be positive");
    check_arg(proj_a.rank() == 2 && proj_b.rank() == 2 &&
                  proj_a.shape() == proj_b.shape(),
              "contrastive: projections must be [m, dim] with equal shapes");
    std::size_t m = proj_a.extent(0);
    check_arg(m >= 2, "contrastive: batch of 1 has an empty negative set");

    auto one_direction = [&](const Tensor& a, const Tensor& b) {
        Tensor sims = div(matmul(a, transpose2d(b)), cfg.temperature);
        // max-shift per row; the shift is a constant and cancels in the ratio
        Tensor shift = Tensor::zeros({m, 1});
        for (std::size_t i = 0; i < m; ++i) {
            double mx = sims.at(i * m);
            for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, sims.at(i * m + j));
            shift.data_mut()[i] = mx;
        }
        Tensor e = exp(sub(sims, shift));
        Tensor eye = Tensor::zeros({m, m});
        for (std::size_t i = 0; i < m; ++i) eye.data_mut()[i * m + i] = 1.0;
        Tensor positives = sum(mul(e, eye), {1});
        Tensor row_sum = sum(e, {1});
        Tensor den = cfg.positive_in_denominator ? row_sum : sub(row_sum, positives);
        return mean(sub(log(den), log(positives)));
    };
    Tensor loss = one_direction(proj_a, proj_b);
    if (cfg.symmetric) loss = div(add(loss, one_direction(proj_b, proj_a)), 2.0);
    return loss;
}

IntGrid pseudo_label(const Tensor& logits) {
    return max_lastaxis(logits.detach()).argmax;
}

namespace {

Tensor dice_ce_pair(const Tensor& logits, const IntGrid& target) {
    std::size_t cls = logits.shape().back();
    Tensor dice = dice_loss(softmax_lastaxis(logits), one_hot(target, cls));
    return mul(add(dice, ce_loss(logits, target)), 0.5);
}

}  // namespace

Tensor supervised_loss(const Tensor& logits_a, const Tensor& logits_b, const IntGrid& label) {
    check_arg(logits_a.shape() == logits_b.shape(), "sup: logits shapes differ");
    return add(dice_ce_pair(logits_a, label), dice_ce_pair(logits_b, label));
}

Tensor cross_supervision_loss(const Tensor& logits_a, const Tensor& logits_b) {
    check_arg(logits_a.shape() == logits_b.shape(), "unsup: logits shapes differ");
    IntGrid pa = pseudo_label(logits_a);
    IntGrid pb = pseudo_label(logits_b);
    return add(dice_ce_pair(logits_a, pb), dice_ce_pair(logits_b, pa));
}

double lambda_schedule(std::size_t t, const ScheduleConfig& cfg) {
    check_arg(cfg.t_max >= 1, "schedule: t_max must be >= 1");
    check_arg(t <= cfg.t_max, "schedule: t out of range");
    double r = 1.0 - static_cast<double>(t) / static_cast<double>(cfg.t_max);
    return cfg.peak * std::exp(-5.0 * r * r);
}

Tensor total_loss(const Tensor& sup, const Tensor& unsup, const Tensor& dfc, std::size_t t,
                  const ScheduleConfig& cfg) {
    check_arg(sup.size() == 1 && unsup.size() == 1 && dfc.size() == 1,
              "total_loss: components must be scalars");
    return add(add(sup, mul(unsup, lambda_schedule(t, cfg))), dfc);
}

}  // namespace dcscan
