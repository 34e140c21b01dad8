#pragma once

#include <optional>
#include <ostream>
#include <string>

#include "dcscan/augment.hpp"
#include "dcscan/losses.hpp"
#include "dcscan/network.hpp"
#include "dcscan/synthetic.hpp"

namespace dcscan {

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t batch_size = 24;
    std::size_t labeled_batch_size = 12;
    std::size_t t_max = 2000;
    std::size_t eval_interval = 200;
    std::uint64_t seed = 0;

    bool enable_unsup = true;
    bool enable_dfc = true;
    // Cross-supervision applies to the whole batch by default; restricting it
    // to the unlabeled sub-batch is the config alternative.
    bool unsup_on_labeled = true;
    bool single_network = false;   // network A alone, supervised loss only

    RouteSetKind routes_a = RouteSetKind::HV;
    RouteSetKind routes_b = RouteSetKind::DA;
    ContrastiveConfig contrastive;
    AugmentConfig augment;

    ScheduleConfig schedule() const {
        ScheduleConfig s;
        s.t_max = t_max;
        return s;
    }
};

// Two networks with distinct route sets, their projectors, SGD momentum
// buffers, and the iteration counter driving the warm-up.
struct CoTrainState {
    TrainConfig cfg;
    NetworkConfig net_cfg;
    SegNetwork net_a, net_b;
    Projector proj_a, proj_b;
    std::vector<NamedParam> params_a, params_b;   // network + projector
    std::vector<Tensor> momentum_a, momentum_b;   // parallel to params
    std::size_t t = 0;

    static CoTrainState init(const TrainConfig& cfg, const NetworkConfig& net_cfg);
};

struct LossBreakdown {
    double sup = 0.0, unsup = 0.0, dfc = 0.0, total = 0.0, lambda = 0.0;
};

// g' = g + wd*theta; v <- mu*v + g'; theta <- theta - lr*v. Gradients are
// consumed (zeroed) by the step.
void sgd_step(std::vector<NamedParam>& params, std::vector<Tensor>& momentum,
              const TrainConfig& cfg);

// One optimization step over an explicit batch. The labeled batch must be
// nonempty; per-image augmentation RNG streams derive from (seed, t, slot).
LossBreakdown train_iteration(CoTrainState& state, const std::vector<Sample>& labeled_batch,
                              const std::vector<Sample>& unlabeled_batch);

// Draws sub-batches without replacement (clamped to pool sizes) with an RNG
// derived from (seed, t), then runs train_iteration.
LossBreakdown train_step(CoTrainState& state, const SplitDataset& data);

struct EvalReport {
    std::size_t n_images = 0;
    double dice = 0.0;
    double miou = 0.0;
    double acc = 0.0;
    std::optional<double> sen, spe;
    // surface means over images where both boundaries exist
    std::size_t n_surface = 0;
    std::optional<double> asd, hd95;
};

// Inference with one network (default A), no augmentation, argmax masks.
EvalReport evaluate(CoTrainState& state, const std::vector<Sample>& samples,
                    char which = 'a');

// Same evaluation over a bare network; optionally collects the predicted
// class maps (one per sample).
EvalReport evaluate_network(SegNetwork& net, const std::vector<Sample>& samples,
                            std::vector<IntGrid>* predictions = nullptr);

// Mean over images of 1 - cos(pooled fused bottleneck feature of A, of B).
double diversity_measure(CoTrainState& state, const std::vector<Sample>& samples);

void save_state(const std::string& dir, CoTrainState& state);
// Rebuilds networks/projectors from the checkpoint and the run config.
CoTrainState load_state(const std::string& dir, const TrainConfig& cfg);

// Full loop: runs from state.t to t_max, appending `iter= sup= unsup= dfc=
// lambda= dice=` lines to metrics.log (and iter/div lines to diversity.log)
// every eval_interval, checkpointing into <out_dir>/checkpoint.
EvalReport train_loop(CoTrainState& state, const SplitDataset& data,
                      const std::string& out_dir, std::ostream* console = nullptr);

}  // namespace dcscan
