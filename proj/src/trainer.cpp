#include "dcscan/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dcscan/checkpoint.hpp"
#include "dcscan/metrics.hpp"

namespace fs = std::filesystem;

namespace dcscan {

namespace {

std::vector<NamedParam> side_params(SegNetwork& net, Projector& proj, const char* side) {
    std::vector<NamedParam> out;
    for (auto& p : net.params()) out.push_back({std::string(side) + ".net." + p.name, p.tensor});
    for (auto& p : proj.params())
        out.push_back({std::string(side) + ".proj." + p.name, p.tensor});
    return out;
}

std::vector<Tensor> zero_like(const std::vector<NamedParam>& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (auto& p : params) out.push_back(Tensor::zeros(p.tensor.shape()));
    return out;
}

void mark_trainable(std::vector<NamedParam>& params) {
    for (auto& p : params) p.tensor.set_requires_grad(true);
}

// Stacks [H,W] images into [B,H,W,1].
Tensor stack_images(const std::vector<Tensor>& imgs) {
    std::size_t h = imgs[0].extent(0), w = imgs[0].extent(1);
    Tensor out = Tensor::zeros({imgs.size(), h, w, 1});
    for (std::size_t b = 0; b < imgs.size(); ++b) {
        check_arg(imgs[b].shape() == imgs[0].shape(), "trainer: mixed image extents in batch");
        std::copy(imgs[b].data(), imgs[b].data() + imgs[b].size(),
                  out.data_mut() + b * h * w);
    }
    return out;
}

IntGrid stack_labels(const std::vector<IntGrid>& labels) {
    std::size_t h = labels[0].shape[0], w = labels[0].shape[1];
    IntGrid out = IntGrid::zeros({labels.size(), h, w});
    for (std::size_t b = 0; b < labels.size(); ++b)
        std::copy(labels[b].v.begin(), labels[b].v.end(), out.v.begin() + b * h * w);
    return out;
}

// Partial Fisher-Yates draw of k distinct indices out of n.
std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(
                                urand_int(rng, 0, static_cast<std::int64_t>(n - i - 1)));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

struct FusedFeature {
    Tensor fused;     // [B,h,w,E]
    Tensor pooled;    // [B,E]
};

FusedFeature fuse_bottleneck(const std::array<Tensor, 4>& route_feats) {
    FusedFeature f;
    f.fused = fuse_features(route_feats, uncertainty_weights(route_feats));
    f.pooled = mean(f.fused, {1, 2});
    return f;
}

}  // namespace

CoTrainState CoTrainState::init(const TrainConfig& cfg, const NetworkConfig& net_cfg) {
    check_arg(cfg.labeled_batch_size >= 1 && cfg.labeled_batch_size <= cfg.batch_size,
              "trainer: labeled sub-batch must fit in the batch");
    check_arg(cfg.learning_rate > 0.0 && cfg.momentum >= 0.0 && cfg.weight_decay >= 0.0,
              "trainer: rates must be nonnegative, lr positive");
    check_arg(cfg.t_max >= 1, "trainer: t_max must be >= 1");
    CoTrainState st;
    st.cfg = cfg;
    st.net_cfg = net_cfg;
    st.net_a = SegNetwork::init(net_cfg, cfg.routes_a, derive_seed(cfg.seed, 0xa));
    st.net_b = SegNetwork::init(net_cfg, cfg.routes_b, derive_seed(cfg.seed, 0xb));
    Rng rng_pa = make_rng(cfg.seed, 0x9a);
    Rng rng_pb = make_rng(cfg.seed, 0x9b);
    st.proj_a = Projector::init(st.net_a.bottleneck_feature_dim(), 16, rng_pa);
    st.proj_b = Projector::init(st.net_b.bottleneck_feature_dim(), 16, rng_pb);
    st.params_a = side_params(st.net_a, st.proj_a, "a");
    st.params_b = side_params(st.net_b, st.proj_b, "b");
    mark_trainable(st.params_a);
    mark_trainable(st.params_b);
    st.momentum_a = zero_like(st.params_a);
    st.momentum_b = zero_like(st.params_b);
    return st;
}

void sgd_step(std::vector<NamedParam>& params, std::vector<Tensor>& momentum,
              const TrainConfig& cfg) {
    check_arg(params.size() == momentum.size(), "sgd: buffer count mismatch");
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& theta = params[k].tensor;
        Tensor& v = momentum[k];
        check_arg(v.shape() == theta.shape(), "sgd: buffer shape mismatch");
        const double* g = theta.has_grad() ? theta.grad().data() : nullptr;
        double* vp = v.data_mut();
        double* tp = theta.data_mut();
        for (std::size_t i = 0, n = theta.size(); i < n; ++i) {
            double grad = (g ? g[i] : 0.0) + cfg.weight_decay * tp[i];
            vp[i] = cfg.momentum * vp[i] + grad;
            tp[i] -= cfg.learning_rate * vp[i];
        }
        theta.zero_grad();
    }
}

LossBreakdown train_iteration(CoTrainState& state, const std::vector<Sample>& labeled_batch,
                              const std::vector<Sample>& unlabeled_batch) {
    const TrainConfig& cfg = state.cfg;
    check_arg(!labeled_batch.empty(), "trainer: empty labeled batch");
    for (auto& s : labeled_batch)
        check_arg(s.has_label(), "trainer: labeled batch contains an unlabeled sample");

    std::size_t n_lab = labeled_batch.size();
    std::size_t n_all = n_lab + unlabeled_batch.size();

    // Augment per image with streams derived from (seed, t, slot): resuming
    // from a checkpoint replays the identical randomness.
    std::vector<Tensor> views_a(n_all), views_b(n_all);
    std::vector<IntGrid> labels(n_lab);
    std::vector<const Sample*> batch;
    for (auto& s : labeled_batch) batch.push_back(&s);
    for (auto& s : unlabeled_batch) batch.push_back(&s);
    parallel_for_each(n_all, [&](std::size_t i) {
        Rng rng = make_rng(cfg.seed, 0xa06, state.t, i);
        const Sample& s = *batch[i];
        AugmentedPair pair =
            mix_augment(s.image, i < n_lab ? &s.label : nullptr, cfg.augment, rng);
        views_a[i] = pair.view_a;
        views_b[i] = pair.view_b;
        if (i < n_lab) labels[i] = *pair.label;
    });

    Tensor xa = stack_images(views_a);
    Tensor xb = stack_images(views_b);
    IntGrid y = stack_labels(labels);

    ScheduleConfig sched = cfg.schedule();
    double lam = lambda_schedule(std::min(state.t, sched.t_max), sched);
    LossBreakdown out;
    out.lambda = lam;

    Tape tape;
    {
        TapeScope scope(tape);
        NetworkOut fa = network_forward(state.net_a, xa);
        Tensor sup, unsup, dfc;
        if (cfg.single_network) {
            Tensor la = slice_axis0(fa.logits, 0, n_lab);
            std::size_t cls = state.net_cfg.num_classes;
            sup = mul(add(dice_loss(softmax_lastaxis(la), one_hot(y, cls)), ce_loss(la, y)),
                      0.5);
            unsup = Tensor::scalar(0.0);
            dfc = Tensor::scalar(0.0);
        } else {
            NetworkOut fb = network_forward(state.net_b, xb);
            Tensor la = slice_axis0(fa.logits, 0, n_lab);
            Tensor lb = slice_axis0(fb.logits, 0, n_lab);
            sup = supervised_loss(la, lb, y);

            if (cfg.enable_unsup) {
                if (cfg.unsup_on_labeled) {
                    unsup = cross_supervision_loss(fa.logits, fb.logits);
                } else if (n_all > n_lab) {
                    unsup = cross_supervision_loss(
                        slice_axis0(fa.logits, n_lab, n_all - n_lab),
                        slice_axis0(fb.logits, n_lab, n_all - n_lab));
                } else {
                    unsup = Tensor::scalar(0.0);
                }
            } else {
                unsup = Tensor::scalar(0.0);
            }

            // a single image has no negatives, so the term only applies to
            // batches of two or more
            if (cfg.enable_dfc && n_all >= 2) {
                FusedFeature ha = fuse_bottleneck(fa.route_feats);
                FusedFeature hb = fuse_bottleneck(fb.route_feats);
                Tensor pa = projector_forward(state.proj_a, ha.fused);
                Tensor pb = projector_forward(state.proj_b, hb.fused);
                dfc = contrastive_loss(pa, pb, cfg.contrastive);
            } else {
                dfc = Tensor::scalar(0.0);
            }
        }
        Tensor total = total_loss(sup, unsup, dfc, std::min(state.t, sched.t_max), sched);
        out.sup = sup.item();
        out.unsup = unsup.item();
        out.dfc = dfc.item();
        out.total = total.item();
        tape.backward(total);
    }

    sgd_step(state.params_a, state.momentum_a, cfg);
    if (!cfg.single_network) sgd_step(state.params_b, state.momentum_b, cfg);
    state.t += 1;
    return out;
}

LossBreakdown train_step(CoTrainState& state, const SplitDataset& data) {
    const TrainConfig& cfg = state.cfg;
    check_arg(!data.labeled.empty(), "trainer: dataset has no labeled samples");
    Rng rng = make_rng(cfg.seed, 0x17e4, state.t);
    std::size_t n_lab = std::min(cfg.labeled_batch_size, data.labeled.size());
    std::size_t n_unl = cfg.single_network
                            ? 0
                            : std::min(cfg.batch_size - cfg.labeled_batch_size,
                                       data.unlabeled.size());
    std::vector<Sample> lab, unl;
    for (std::size_t i : draw_without_replacement(data.labeled.size(), n_lab, rng))
        lab.push_back(data.labeled[i]);
    for (std::size_t i : draw_without_replacement(data.unlabeled.size(), n_unl, rng))
        unl.push_back(data.unlabeled[i]);
    return train_iteration(state, lab, unl);
}

EvalReport evaluate(CoTrainState& state, const std::vector<Sample>& samples, char which) {
    check_arg(which == 'a' || which == 'b', "evaluate: network must be 'a' or 'b'");
    return evaluate_network(which == 'a' ? state.net_a : state.net_b, samples);
}

EvalReport evaluate_network(SegNetwork& net, const std::vector<Sample>& samples,
                            std::vector<IntGrid>* predictions) {
    check_arg(!samples.empty(), "evaluate: empty dataset");
    std::size_t cls = net.cfg.num_classes;
    if (predictions) predictions->resize(samples.size());

    struct PerImage {
        OverlapReport overlap;
        std::optional<SurfaceMetrics> surface;
    };
    std::vector<PerImage> rows(samples.size());
    parallel_for_each(samples.size(), [&](std::size_t i) {
        const Sample& s = samples[i];
        check_arg(s.has_label(), "evaluate: sample without a label");
        Tensor img = reshape(s.image, {1, s.image.extent(0), s.image.extent(1), 1});
        NetworkOut f = network_forward(net, img);
        IntGrid pred3 = pseudo_label(f.logits);
        IntGrid pred;
        pred.shape = {s.image.extent(0), s.image.extent(1)};
        pred.v = pred3.v;
        rows[i].overlap = overlap_metrics(pred, s.label, cls);
        // surface distances over the union of foreground classes
        IntGrid pm = pred, gm = s.label;
        for (auto& v : pm.v) v = v > 0 ? 1 : 0;
        for (auto& v : gm.v) v = v > 0 ? 1 : 0;
        rows[i].surface = surface_metrics(pm, gm);
        if (predictions) (*predictions)[i] = std::move(pred);
    });

    EvalReport rep;
    rep.n_images = samples.size();
    double sen_sum = 0.0, spe_sum = 0.0, asd_sum = 0.0, hd_sum = 0.0;
    std::size_t sen_n = 0, spe_n = 0;
    for (auto& r : rows) {
        rep.dice += r.overlap.mean_dice;
        rep.miou += r.overlap.mean_iou;
        rep.acc += r.overlap.acc;
        if (r.overlap.mean_sen) {
            sen_sum += *r.overlap.mean_sen;
            ++sen_n;
        }
        if (r.overlap.mean_spe) {
            spe_sum += *r.overlap.mean_spe;
            ++spe_n;
        }
        if (r.surface) {
            asd_sum += r.surface->asd;
            hd_sum += r.surface->hd95;
            ++rep.n_surface;
        }
    }
    double n = static_cast<double>(samples.size());
    rep.dice /= n;
    rep.miou /= n;
    rep.acc /= n;
    if (sen_n) rep.sen = sen_sum / static_cast<double>(sen_n);
    if (spe_n) rep.spe = spe_sum / static_cast<double>(spe_n);
    if (rep.n_surface) {
        rep.asd = asd_sum / static_cast<double>(rep.n_surface);
        rep.hd95 = hd_sum / static_cast<double>(rep.n_surface);
    }
    return rep;
}

double diversity_measure(CoTrainState& state, const std::vector<Sample>& samples) {
    check_arg(!samples.empty(), "diversity: empty dataset");
    std::vector<double> dist(samples.size());
    parallel_for_each(samples.size(), [&](std::size_t i) {
        const Sample& s = samples[i];
        Tensor img = reshape(s.image, {1, s.image.extent(0), s.image.extent(1), 1});
        Tensor pa = fuse_bottleneck(network_forward(state.net_a, img).route_feats).pooled;
        Tensor pb = fuse_bottleneck(network_forward(state.net_b, img).route_feats).pooled;
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t k = 0; k < pa.size(); ++k) {
            dot += pa.at(k) * pb.at(k);
            na += pa.at(k) * pa.at(k);
            nb += pb.at(k) * pb.at(k);
        }
        check_run(na > 0.0 && nb > 0.0, "diversity: zero-norm pooled feature");
        dist[i] = 1.0 - dot / std::sqrt(na * nb);
    });
    double sum = 0.0;
    for (double d : dist) sum += d;
    return sum / static_cast<double>(samples.size());
}

void save_state(const std::string& dir, CoTrainState& state) {
    fs::create_directories(dir);
    save_network((fs::path(dir) / "net_a").string(), state.net_a);
    save_network((fs::path(dir) / "net_b").string(), state.net_b);
    save_projector((fs::path(dir) / "proj_a").string(), state.proj_a);
    save_projector((fs::path(dir) / "proj_b").string(), state.proj_b);
    auto momentum_params = [](const std::vector<NamedParam>& params,
                              std::vector<Tensor>& bufs) {
        std::vector<NamedParam> out;
        for (std::size_t i = 0; i < params.size(); ++i)
            out.push_back({params[i].name, bufs[i]});
        return out;
    };
    write_param_dir((fs::path(dir) / "mom_a").string(), {{"kind", "momentum"}},
                    momentum_params(state.params_a, state.momentum_a));
    write_param_dir((fs::path(dir) / "mom_b").string(), {{"kind", "momentum"}},
                    momentum_params(state.params_b, state.momentum_b));
    std::ofstream st(fs::path(dir) / "state.txt");
    st << "iteration " << state.t << "\n";
    check_run(st.good(), "checkpoint: cannot write state.txt in '" + dir + "'");
}

CoTrainState load_state(const std::string& dir, const TrainConfig& cfg) {
    SegNetwork net_a = load_network((fs::path(dir) / "net_a").string());
    CoTrainState st = CoTrainState::init(cfg, net_a.cfg);
    check_run(st.net_a.routes == net_a.routes,
              "checkpoint: route set of net_a differs from the config");
    read_params_into((fs::path(dir) / "net_a").string(), st.net_a.params());
    read_params_into((fs::path(dir) / "net_b").string(), st.net_b.params());
    read_params_into((fs::path(dir) / "proj_a").string(), st.proj_a.params());
    read_params_into((fs::path(dir) / "proj_b").string(), st.proj_b.params());
    auto momentum_params = [](const std::vector<NamedParam>& params,
                              std::vector<Tensor>& bufs) {
        std::vector<NamedParam> out;
        for (std::size_t i = 0; i < params.size(); ++i)
            out.push_back({params[i].name, bufs[i]});
        return out;
    };
    read_params_into((fs::path(dir) / "mom_a").string(),
                     momentum_params(st.params_a, st.momentum_a));
    read_params_into((fs::path(dir) / "mom_b").string(),
                     momentum_params(st.params_b, st.momentum_b));
    std::ifstream f(fs::path(dir) / "state.txt");
    std::string key;
    std::size_t t = 0;
    f >> key >> t;
    check_run(f.good() && key == "iteration", "checkpoint: malformed state.txt in '" + dir + "'");
    st.t = t;
    return st;
}

EvalReport train_loop(CoTrainState& state, const SplitDataset& data,
                      const std::string& out_dir, std::ostream* console) {
    fs::create_directories(out_dir);
    std::ofstream metrics(fs::path(out_dir) / "metrics.log", std::ios::app);
    std::ofstream diversity(fs::path(out_dir) / "diversity.log", std::ios::app);
    check_run(metrics.good() && diversity.good(),
              "trainer: cannot open logs in '" + out_dir + "'");

    EvalReport last;
    while (state.t < state.cfg.t_max) {
        LossBreakdown lb = train_step(state, data);
        bool at_eval = state.t % state.cfg.eval_interval == 0 || state.t == state.cfg.t_max;
        if (at_eval) {
            const std::vector<Sample>& eval_set =
                data.test.empty() ? data.labeled : data.test;
            last = evaluate(state, eval_set, 'a');
            metrics << "iter=" << state.t << " sup=" << lb.sup << " unsup=" << lb.unsup
                    << " dfc=" << lb.dfc << " lambda=" << lb.lambda << " dice=" << last.dice
                    << "\n";
            metrics.flush();
            if (!state.cfg.single_network) {
                diversity << "iter=" << state.t << " div="
                          << diversity_measure(state, eval_set) << "\n";
                diversity.flush();
            }
            if (console)
                (*console) << "iter=" << state.t << " total=" << lb.total
                           << " dice=" << last.dice << std::endl;
            save_state((fs::path(out_dir) / "checkpoint").string(), state);
        }
    }
    return last;
}

}  // namespace dcscan
