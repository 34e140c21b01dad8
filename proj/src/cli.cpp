#include "dcscan/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcscan/checkpoint.hpp"
#include "dcscan/image_io.hpp"
#include "dcscan/routes.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dcscan {

namespace {

// Every known key with its reader; unknown keys in the file are rejected.
void apply_config(const json& j, RunConfig& cfg, const std::string& origin) {
    std::map<std::string, std::function<void(const json&)>> readers = {
        {"seed", [&](const json& v) { cfg.seed = v.get<std::uint64_t>(); }},
        {"out_dir", [&](const json& v) { cfg.out_dir = v.get<std::string>(); }},

        {"image_size", [&](const json& v) { cfg.data.extent = v.get<std::size_t>(); }},
        {"num_classes",
         [&](const json& v) {
             cfg.data.num_classes = v.get<std::size_t>();
             cfg.network.num_classes = cfg.data.num_classes;
         }},
        {"n_labeled", [&](const json& v) { cfg.data.n_labeled = v.get<std::size_t>(); }},
        {"n_unlabeled", [&](const json& v) { cfg.data.n_unlabeled = v.get<std::size_t>(); }},
        {"n_test", [&](const json& v) { cfg.data.n_test = v.get<std::size_t>(); }},
        {"noise_sigma", [&](const json& v) { cfg.data.noise_sigma = v.get<double>(); }},
        {"bar_thickness_min",
         [&](const json& v) { cfg.data.thickness_min = v.get<std::size_t>(); }},
        {"bar_thickness_max",
         [&](const json& v) { cfg.data.thickness_max = v.get<std::size_t>(); }},
        {"bar_length_min", [&](const json& v) { cfg.data.length_min = v.get<std::size_t>(); }},
        {"bar_length_max", [&](const json& v) { cfg.data.length_max = v.get<std::size_t>(); }},
        {"fg_level", [&](const json& v) { cfg.data.fg_level = v.get<double>(); }},
        {"bg_level", [&](const json& v) { cfg.data.bg_level = v.get<double>(); }},
        {"data_manifest", [&](const json& v) { cfg.data_manifest = v.get<std::string>(); }},
        {"save_dataset", [&](const json& v) { cfg.save_dataset = v.get<bool>(); }},

        {"patch_size",
         [&](const json& v) { cfg.train.augment.patch_size = v.get<std::size_t>(); }},
        {"alpha", [&](const json& v) { cfg.train.augment.alpha = v.get<double>(); }},
        {"blur_sigma_min",
         [&](const json& v) { cfg.train.augment.blur_sigma_min = v.get<double>(); }},
        {"blur_sigma_max",
         [&](const json& v) { cfg.train.augment.blur_sigma_max = v.get<double>(); }},
        {"brightness_delta",
         [&](const json& v) { cfg.train.augment.brightness_delta = v.get<double>(); }},
        {"contrast_min",
         [&](const json& v) { cfg.train.augment.contrast_min = v.get<double>(); }},
        {"contrast_max",
         [&](const json& v) { cfg.train.augment.contrast_max = v.get<double>(); }},
        {"gamma_min", [&](const json& v) { cfg.train.augment.gamma_min = v.get<double>(); }},
        {"gamma_max", [&](const json& v) { cfg.train.augment.gamma_max = v.get<double>(); }},

        {"base_channels",
         [&](const json& v) { cfg.network.base_channels = v.get<std::size_t>(); }},
        {"encoder_stages",
         [&](const json& v) { cfg.network.encoder_stages = v.get<std::size_t>(); }},
        {"expansion", [&](const json& v) { cfg.network.expansion = v.get<std::size_t>(); }},
        {"state_dim", [&](const json& v) { cfg.network.state_dim = v.get<std::size_t>(); }},

        {"temperature",
         [&](const json& v) { cfg.train.contrastive.temperature = v.get<double>(); }},
        {"contrastive_positive_in_denominator",
         [&](const json& v) {
             cfg.train.contrastive.positive_in_denominator = v.get<bool>();
         }},
        {"contrastive_symmetric",
         [&](const json& v) { cfg.train.contrastive.symmetric = v.get<bool>(); }},

        {"learning_rate", [&](const json& v) { cfg.train.learning_rate = v.get<double>(); }},
        {"momentum", [&](const json& v) { cfg.train.momentum = v.get<double>(); }},
        {"weight_decay", [&](const json& v) { cfg.train.weight_decay = v.get<double>(); }},
        {"batch_size", [&](const json& v) { cfg.train.batch_size = v.get<std::size_t>(); }},
        {"labeled_batch_size",
         [&](const json& v) { cfg.train.labeled_batch_size = v.get<std::size_t>(); }},
        {"t_max", [&](const json& v) { cfg.train.t_max = v.get<std::size_t>(); }},
        {"eval_interval",
         [&](const json& v) { cfg.train.eval_interval = v.get<std::size_t>(); }},
        {"enable_unsup", [&](const json& v) { cfg.train.enable_unsup = v.get<bool>(); }},
        {"enable_dfc", [&](const json& v) { cfg.train.enable_dfc = v.get<bool>(); }},
        {"unsup_on_labeled",
         [&](const json& v) { cfg.train.unsup_on_labeled = v.get<bool>(); }},
        {"single_network", [&](const json& v) { cfg.train.single_network = v.get<bool>(); }},
        {"routes_a",
         [&](const json& v) { cfg.train.routes_a = route_set_from_string(v.get<std::string>()); }},
        {"routes_b",
         [&](const json& v) { cfg.train.routes_b = route_set_from_string(v.get<std::string>()); }},
    };
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto r = readers.find(it.key());
        check_arg(r != readers.end(), origin + ": unknown config key '" + it.key() + "'");
        try {
            r->second(it.value());
        } catch (const json::exception& e) {
            throw std::invalid_argument(origin + ": bad value for '" + it.key() +
                                        "': " + e.what());
        }
    }
    cfg.data.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(origin + ": invalid JSON: " + e.what());
    }
    check_arg(j.is_object(), origin + ": config must be a JSON object");
    RunConfig cfg;
    apply_config(j, cfg, origin);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    check_arg(f.good(), "config file '" + path + "' cannot be opened");
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_run_config(buf.str(), path);
}

std::string dump_run_config(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["image_size"] = cfg.data.extent;
    j["num_classes"] = cfg.data.num_classes;
    j["n_labeled"] = cfg.data.n_labeled;
    j["n_unlabeled"] = cfg.data.n_unlabeled;
    j["n_test"] = cfg.data.n_test;
    j["noise_sigma"] = cfg.data.noise_sigma;
    j["bar_thickness_min"] = cfg.data.thickness_min;
    j["bar_thickness_max"] = cfg.data.thickness_max;
    j["bar_length_min"] = cfg.data.length_min;
    j["bar_length_max"] = cfg.data.length_max;
    j["fg_level"] = cfg.data.fg_level;
    j["bg_level"] = cfg.data.bg_level;
    j["data_manifest"] = cfg.data_manifest;
    j["save_dataset"] = cfg.save_dataset;
    j["patch_size"] = cfg.train.augment.patch_size;
    j["alpha"] = cfg.train.augment.alpha;
    j["blur_sigma_min"] = cfg.train.augment.blur_sigma_min;
    j["blur_sigma_max"] = cfg.train.augment.blur_sigma_max;
    j["brightness_delta"] = cfg.train.augment.brightness_delta;
    j["contrast_min"] = cfg.train.augment.contrast_min;
    j["contrast_max"] = cfg.train.augment.contrast_max;
    j["gamma_min"] = cfg.train.augment.gamma_min;
    j["gamma_max"] = cfg.train.augment.gamma_max;
    j["base_channels"] = cfg.network.base_channels;
    j["encoder_stages"] = cfg.network.encoder_stages;
    j["expansion"] = cfg.network.expansion;
    j["state_dim"] = cfg.network.state_dim;
    j["temperature"] = cfg.train.contrastive.temperature;
    j["contrastive_positive_in_denominator"] = cfg.train.contrastive.positive_in_denominator;
    j["contrastive_symmetric"] = cfg.train.contrastive.symmetric;
    j["learning_rate"] = cfg.train.learning_rate;
    j["momentum"] = cfg.train.momentum;
    j["weight_decay"] = cfg.train.weight_decay;
    j["batch_size"] = cfg.train.batch_size;
    j["labeled_batch_size"] = cfg.train.labeled_batch_size;
    j["t_max"] = cfg.train.t_max;
    j["eval_interval"] = cfg.train.eval_interval;
    j["enable_unsup"] = cfg.train.enable_unsup;
    j["enable_dfc"] = cfg.train.enable_dfc;
    j["unsup_on_labeled"] = cfg.train.unsup_on_labeled;
    j["single_network"] = cfg.train.single_network;
    j["routes_a"] = to_string(cfg.train.routes_a);
    j["routes_b"] = to_string(cfg.train.routes_b);
    return j.dump(2);
}

namespace {

void print_report(std::ostream& os, const EvalReport& rep) {
    auto opt = [](const std::optional<double>& v) {
        return v ? std::to_string(*v) : std::string("n/a");
    };
    os << "images " << rep.n_images << "\n"
       << "dice   " << rep.dice << "\n"
       << "miou   " << rep.miou << "\n"
       << "acc    " << rep.acc << "\n"
       << "spe    " << opt(rep.spe) << "\n"
       << "sen    " << opt(rep.sen) << "\n"
       << "hd95   " << opt(rep.hd95) << " (defined on " << rep.n_surface << " images)\n"
       << "asd    " << opt(rep.asd) << " (defined on " << rep.n_surface << " images)\n";
}

int cmd_train(const std::string& config_path, bool dry_run, bool dump) {
    RunConfig cfg = load_run_config(config_path);
    if (dump) {
        std::cout << dump_run_config(cfg) << std::endl;
        return 0;
    }
    if (dry_run) {
        std::cout << "config ok\n" << dump_run_config(cfg) << std::endl;
        return 0;
    }
    SplitDataset data = cfg.data_manifest.empty() ? gen_synthetic(cfg.data)
                                                  : load_dataset(cfg.data_manifest);
    if (cfg.save_dataset)
        save_dataset((fs::path(cfg.out_dir) / "data").string(), data);
    CoTrainState state = CoTrainState::init(cfg.train, cfg.network);
    EvalReport rep = train_loop(state, data, cfg.out_dir, &std::cout);
    std::ofstream report(fs::path(cfg.out_dir) / "report.txt");
    print_report(report, rep);
    print_report(std::cout, rep);
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& manifest, const std::string& which,
             const std::string& out_dir) {
    std::string net_dir = (fs::path(ckpt) / ("net_" + which)).string();
    if (!fs::exists(fs::path(net_dir) / "manifest.txt")) net_dir = ckpt;   // bare network dir
    SegNetwork net = load_network(net_dir);
    RouteSetKind expected = which == "a" ? RouteSetKind::HV : RouteSetKind::DA;
    if (net.routes != expected)
        std::cerr << "warning: checkpoint route set '" << to_string(net.routes)
                  << "' differs from the usual '" << to_string(expected) << "' for network "
                  << which << "; proceeding\n";

    SplitDataset data = load_dataset(manifest);
    const std::vector<Sample>& samples = data.test.empty() ? data.labeled : data.test;
    check_arg(!samples.empty(), "eval: dataset has no labeled samples to score");
    std::vector<IntGrid> preds;
    EvalReport rep = evaluate_network(net, samples, &preds);
    print_report(std::cout, rep);
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        std::ostringstream name;
        name << "pred_" << std::setw(4) << std::setfill('0') << i << ".pgm";
        write_pgm_indexed((fs::path(out_dir) / name.str()).string(), preds[i]);
    }
    return 0;
}

int cmd_demo_scan(std::size_t size) {
    for (ScanDirection d :
         {ScanDirection::HFwd, ScanDirection::HBwd, ScanDirection::VFwd, ScanDirection::VBwd,
          ScanDirection::DFwd, ScanDirection::DBwd, ScanDirection::ADFwd,
          ScanDirection::ADBwd}) {
        RoutePermutation p = route_order(d, size, size);
        std::cout << to_string(d) << " order:";
        for (std::size_t i : p.order) std::cout << " " << i;
        std::cout << "\n" << to_string(d) << " visit ranks:\n";
        std::vector<std::size_t> rank(p.order.size());
        for (std::size_t i = 0; i < p.order.size(); ++i) rank[p.order[i]] = i;
        for (std::size_t r = 0; r < size; ++r) {
            std::cout << " ";
            for (std::size_t c = 0; c < size; ++c) std::cout << " " << rank[r * size + c];
            std::cout << "\n";
        }
    }
    return 0;
}

int cmd_demo_augment(std::uint64_t seed, std::size_t size, double alpha,
                     const std::string& out_dir) {
    SyntheticSpec spec;
    spec.extent = size;
    spec.length_min = std::min<std::size_t>(spec.length_min, size / 2);
    spec.length_max = size;
    spec.n_labeled = 1;
    spec.n_unlabeled = 0;
    spec.n_test = 0;
    spec.seed = seed;
    SplitDataset ds = gen_synthetic(spec);
    AugmentConfig cfg;
    cfg.alpha = alpha;
    Rng rng = make_rng(seed, 0xde30);
    AugmentedPair pair = mix_augment(ds.labeled[0].image, &ds.labeled[0].label, cfg, rng);
    fs::create_directories(out_dir);
    write_pgm((fs::path(out_dir) / "view_a.pgm").string(), pair.view_a);
    write_pgm((fs::path(out_dir) / "view_b.pgm").string(), pair.view_b);
    Tensor mask = Tensor::zeros({pair.strong_in_a.shape[0], pair.strong_in_a.shape[1]});
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask.data_mut()[i] = pair.strong_in_a.v[i] ? 1.0 : 0.0;
    write_pgm((fs::path(out_dir) / "mask.pgm").string(), mask);
    std::cout << "wrote view_a.pgm view_b.pgm mask.pgm under " << out_dir << "\n";
    return 0;
}

int cmd_demo_diversity(const std::string& log_path) {
    std::ifstream f(log_path);
    if (!f.good()) {
        std::cerr << "diversity log '" << log_path << "' cannot be opened\n";
        return 1;
    }
    std::string line;
    std::size_t rows = 0;
    std::cout << "iteration  cosine-distance\n";
    while (std::getline(f, line)) {
        std::size_t ip = line.find("iter=");
        std::size_t dp = line.find("div=");
        if (ip == std::string::npos || dp == std::string::npos) continue;
        std::string it = line.substr(ip + 5, line.find(' ', ip) - ip - 5);
        std::string dv = line.substr(dp + 4);
        std::cout << it << "  " << dv << "\n";
        ++rows;
    }
    if (rows == 0) {
        std::cerr << "diversity log '" << log_path << "' has no usable entries\n";
        return 1;
    }
    return 0;
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
    CLI::App app{"diverse-scan co-training on synthetic directional data"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "train from a JSON config");
    std::string config_path;
    bool dry_run = false, dump = false;
    train->add_option("--config", config_path, "path to the run config")->required();
    train->add_flag("--dry-run", dry_run, "validate the config and print resolved defaults");
    train->add_flag("--dump-config", dump, "print the resolved config as JSON and exit");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string ckpt, manifest, which = "a", eval_out = "eval_out";
    eval->add_option("--checkpoint", ckpt, "checkpoint directory")->required();
    eval->add_option("--data", manifest, "dataset manifest path")->required();
    eval->add_option("--network", which, "which network to evaluate")
        ->check(CLI::IsMember({"a", "b"}));
    eval->add_option("--out", eval_out, "directory for predicted masks");

    auto* demo = app.add_subcommand("demo", "inspection dumps");
    std::string kind;
    std::size_t size = 3;
    std::uint64_t seed = 0;
    double alpha = 0.9;
    std::string log_path = "diversity.log", demo_out = "demo_out";
    demo->add_option("kind", kind, "scan | augment | diversity")->required();
    demo->add_option("--size", size, "grid/image extent");
    demo->add_option("--seed", seed, "RNG seed");
    demo->add_option("--alpha", alpha, "photometric application probability");
    demo->add_option("--log", log_path, "diversity log to print");
    demo->add_option("--out", demo_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*train) return cmd_train(config_path, dry_run, dump);
        if (*eval) return cmd_eval(ckpt, manifest, which, eval_out);
        if (*demo) {
            if (kind == "scan") return cmd_demo_scan(size);
            if (kind == "augment")
                return cmd_demo_augment(seed, size == 3 ? 32 : size, alpha, demo_out);
            if (kind == "diversity") return cmd_demo_diversity(log_path);
            std::cerr << "unknown demo kind '" << kind << "' (want scan|augment|diversity)\n";
            return 2;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace dcscan
