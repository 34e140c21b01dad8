#include "dcscan/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dcscan/tensor_io.hpp"

namespace fs = std::filesystem;

namespace dcscan {

namespace {

std::string file_for(const std::string& name) {
    std::string f = name;
    for (char& c : f)
        if (c == '.' || c == '/') c = '_';
    return f + ".dct1";
}

std::size_t meta_size(const std::map<std::string, std::string>& meta, const std::string& key) {
    auto it = meta.find(key);
    check_run(it != meta.end(), "checkpoint: manifest is missing '" + key + "'");
    return static_cast<std::size_t>(std::stoul(it->second));
}

}  // namespace

void write_param_dir(const std::string& dir, const std::map<std::string, std::string>& meta,
                     const std::vector<NamedParam>& params) {
    fs::create_directories(dir);
    std::ofstream m(fs::path(dir) / "manifest.txt");
    check_run(m.good(), "checkpoint: cannot write manifest in '" + dir + "'");
    m << "dcscan-params v1\n";
    for (const auto& [k, v] : meta) m << "meta " << k << " " << v << "\n";
    for (const auto& p : params) {
        std::string f = file_for(p.name);
        m << "param " << p.name << " " << f << "\n";
        write_dct1((fs::path(dir) / f).string(), p.tensor);
    }
    check_run(m.good(), "checkpoint: manifest write failed in '" + dir + "'");
}

namespace {

void parse_manifest(const std::string& dir, std::map<std::string, std::string>& meta,
                    std::map<std::string, std::string>& files) {
    std::ifstream m(fs::path(dir) / "manifest.txt");
    check_run(m.good(), "checkpoint: cannot open manifest in '" + dir + "'");
    std::string line;
    std::getline(m, line);
    check_run(line == "dcscan-params v1", "checkpoint: unknown manifest header in '" + dir + "'");
    while (std::getline(m, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string kind;
        is >> kind;
        if (kind == "meta") {
            std::string k, v;
            is >> k >> v;
            meta[k] = v;
        } else if (kind == "param") {
            std::string name, file;
            is >> name >> file;
            files[name] = file;
        } else {
            check_run(false, "checkpoint: unknown manifest line '" + line + "'");
        }
    }
}

}  // namespace

std::map<std::string, std::string> read_param_meta(const std::string& dir) {
    std::map<std::string, std::string> meta, files;
    parse_manifest(dir, meta, files);
    return meta;
}

void read_params_into(const std::string& dir, std::vector<NamedParam> params) {
    std::map<std::string, std::string> meta, files;
    parse_manifest(dir, meta, files);
    for (auto& p : params) {
        auto it = files.find(p.name);
        check_run(it != files.end(), "checkpoint: '" + dir + "' has no tensor '" + p.name + "'");
        Tensor loaded = read_dct1((fs::path(dir) / it->second).string());
        check_run(loaded.shape() == p.tensor.shape(),
                  "checkpoint: shape mismatch for '" + p.name + "': file " +
                      shape_str(loaded.shape()) + " vs model " + shape_str(p.tensor.shape()));
        std::copy(loaded.data(), loaded.data() + loaded.size(), p.tensor.data_mut());
    }
}

void save_network(const std::string& dir, SegNetwork& net) {
    std::map<std::string, std::string> meta = {
        {"kind", "network"},
        {"route_set", to_string(net.routes)},
        {"in_channels", std::to_string(net.cfg.in_channels)},
        {"base_channels", std::to_string(net.cfg.base_channels)},
        {"encoder_stages", std::to_string(net.cfg.encoder_stages)},
        {"num_classes", std::to_string(net.cfg.num_classes)},
        {"expansion", std::to_string(net.cfg.expansion)},
        {"state_dim", std::to_string(net.cfg.state_dim)},
    };
    write_param_dir(dir, meta, net.params());
}

SegNetwork load_network(const std::string& dir) {
    auto meta = read_param_meta(dir);
    NetworkConfig cfg;
    cfg.in_channels = meta_size(meta, "in_channels");
    cfg.base_channels = meta_size(meta, "base_channels");
    cfg.encoder_stages = meta_size(meta, "encoder_stages");
    cfg.num_classes = meta_size(meta, "num_classes");
    cfg.expansion = meta_size(meta, "expansion");
    cfg.state_dim = meta_size(meta, "state_dim");
    auto rs = meta.find("route_set");
    check_run(rs != meta.end(), "checkpoint: manifest is missing 'route_set'");
    SegNetwork net = SegNetwork::init(cfg, route_set_from_string(rs->second), 0);
    read_params_into(dir, net.params());
    return net;
}

void save_projector(const std::string& dir, Projector& proj) {
    std::map<std::string, std::string> meta = {
        {"kind", "projector"},
        {"in_dim", std::to_string(proj.in_dim)},
        {"width", std::to_string(proj.width)},
    };
    write_param_dir(dir, meta, proj.params());
}

Projector load_projector(const std::string& dir) {
    auto meta = read_param_meta(dir);
    Rng rng = make_rng(0);
    Projector p = Projector::init(meta_size(meta, "in_dim"), meta_size(meta, "width"), rng);
    read_params_into(dir, p.params());
    return p;
}

}  // namespace dcscan
