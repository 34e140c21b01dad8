#include "dcscan/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dcscan/image_io.hpp"
#include "dcscan/tensor_io.hpp"

namespace fs = std::filesystem;

namespace dcscan {

std::string to_string(TargetFamily f) {
    return f == TargetFamily::VerticalBar ? "vertical" : "tilted45";
}

TargetFamily family_from_string(const std::string& s) {
    if (s == "vertical") return TargetFamily::VerticalBar;
    if (s == "tilted45") return TargetFamily::TiltedBar45;
    throw std::invalid_argument("dataset: unknown target family '" + s + "'");
}

IntGrid render_bar(TargetFamily family, std::size_t extent, std::size_t r0, std::size_t c0,
                   std::size_t len, std::size_t thickness) {
    check_arg(extent >= 2, "render_bar: degenerate extent");
    check_arg(len >= 1 && thickness >= 1, "render_bar: degenerate bar");
    IntGrid mask = IntGrid::zeros({extent, extent});
    if (family == TargetFamily::VerticalBar) {
        check_arg(r0 + len <= extent && c0 + thickness <= extent,
                  "render_bar: bar exceeds the extent");
        for (std::size_t r = r0; r < r0 + len; ++r)
            for (std::size_t c = c0; c < c0 + thickness; ++c) mask.v[r * extent + c] = 1;
    } else {
        check_arg(r0 + len <= extent && c0 + len + thickness - 1 <= extent,
                  "render_bar: bar exceeds the extent");
        for (std::size_t k = 0; k < len; ++k)
            for (std::size_t c = c0 + k; c < c0 + k + thickness; ++c)
                mask.v[(r0 + k) * extent + c] = 1;
    }
    return mask;
}

namespace {

Sample make_sample(const SyntheticSpec& spec, Rng& rng) {
    std::size_t h = spec.extent;
    TargetFamily fam = urand_coin(rng) ? TargetFamily::TiltedBar45 : TargetFamily::VerticalBar;
    std::size_t th = static_cast<std::size_t>(
        urand_int(rng, static_cast<std::int64_t>(spec.thickness_min),
                  static_cast<std::int64_t>(spec.thickness_max)));
    th = std::min(th, h - 1);
    // keep the bar inside the image for both families
    std::size_t len_cap = fam == TargetFamily::VerticalBar ? h : h + 1 - th;
    std::size_t len_lo = std::min(spec.length_min, len_cap);
    std::size_t len_hi = std::min(spec.length_max, len_cap);
    std::size_t len = static_cast<std::size_t>(urand_int(
        rng, static_cast<std::int64_t>(len_lo), static_cast<std::int64_t>(len_hi)));
    std::size_t r0 = static_cast<std::size_t>(
        urand_int(rng, 0, static_cast<std::int64_t>(h - len)));
    std::size_t c_span = fam == TargetFamily::VerticalBar ? th : len + th - 1;
    std::size_t c0 = static_cast<std::size_t>(
        urand_int(rng, 0, static_cast<std::int64_t>(h - c_span)));

    Sample s;
    s.family = fam;
    s.label = render_bar(fam, h, r0, c0, len, th);
    s.image = Tensor::zeros({h, h});
    for (std::size_t i = 0; i < s.image.size(); ++i) {
        double base = s.label.v[i] ? spec.fg_level : spec.bg_level;
        double v = base + spec.noise_sigma * nrand(rng);
        s.image.data_mut()[i] = std::min(1.0, std::max(0.0, v));
    }
    return s;
}

}  // namespace

SplitDataset gen_synthetic(const SyntheticSpec& spec) {
    check_arg(spec.extent >= 8, "dataset: degenerate extent");
    check_arg(spec.num_classes == 2, "dataset: synthetic bars are two-class");
    check_arg(spec.noise_sigma >= 0.0, "dataset: negative noise");
    SplitDataset ds;
    // disjoint streams per split keep splits independent of each other's sizes
    Rng rl = make_rng(spec.seed, 0xda7a, 1);
    Rng ru = make_rng(spec.seed, 0xda7a, 2);
    Rng rt = make_rng(spec.seed, 0xda7a, 3);
    for (std::size_t i = 0; i < spec.n_labeled; ++i) ds.labeled.push_back(make_sample(spec, rl));
    for (std::size_t i = 0; i < spec.n_unlabeled; ++i)
        ds.unlabeled.push_back(make_sample(spec, ru));
    for (std::size_t i = 0; i < spec.n_test; ++i) ds.test.push_back(make_sample(spec, rt));
    return ds;
}

namespace {

void save_split(const std::string& dir, const std::string& tag,
                const std::vector<Sample>& split, bool with_labels, std::ofstream& manifest) {
    for (std::size_t i = 0; i < split.size(); ++i) {
        std::ostringstream base;
        base << tag << "_" << std::setw(4) << std::setfill('0') << i;
        // lossless tensor referenced by the manifest, PGM preview alongside
        std::string img_rel = base.str() + ".dct1";
        write_dct1((fs::path(dir) / img_rel).string(), split[i].image);
        write_pgm((fs::path(dir) / (base.str() + ".pgm")).string(), split[i].image);
        std::string lab_rel = "-";
        if (with_labels && split[i].has_label()) {
            lab_rel = base.str() + "_label.pgm";
            write_pgm_indexed((fs::path(dir) / lab_rel).string(), split[i].label);
        }
        manifest << tag << " " << to_string(split[i].family) << " " << img_rel << " "
                 << lab_rel << "\n";
    }
}

}  // namespace

void save_dataset(const std::string& dir, const SplitDataset& ds) {
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / "manifest.txt");
    check_run(manifest.good(), "dataset: cannot write manifest in '" + dir + "'");
    save_split(dir, "labeled", ds.labeled, true, manifest);
    save_split(dir, "unlabeled", ds.unlabeled, false, manifest);
    save_split(dir, "test", ds.test, true, manifest);
    check_run(manifest.good(), "dataset: manifest write failed in '" + dir + "'");
}

SplitDataset load_dataset(const std::string& manifest_path) {
    std::ifstream manifest(manifest_path);
    check_run(manifest.good(), "dataset: cannot open manifest '" + manifest_path + "'");
    fs::path dir = fs::path(manifest_path).parent_path();
    SplitDataset ds;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(manifest, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string split, family, img_rel, lab_rel;
        is >> split >> family >> img_rel >> lab_rel;
        check_run(!img_rel.empty() && !lab_rel.empty(),
                  "dataset: malformed manifest line " + std::to_string(lineno));
        Sample s;
        s.family = family_from_string(family);
        bool dct = img_rel.size() > 5 && img_rel.substr(img_rel.size() - 5) == ".dct1";
        s.image = dct ? read_dct1((dir / img_rel).string())
                      : read_pgm((dir / img_rel).string());
        check_run(s.image.rank() == 2, "dataset: image '" + img_rel + "' must be rank 2");
        if (lab_rel != "-") s.label = read_pgm_indexed((dir / lab_rel).string());
        if (split == "labeled")
            ds.labeled.push_back(std::move(s));
        else if (split == "unlabeled")
            ds.unlabeled.push_back(std::move(s));
        else if (split == "test")
            ds.test.push_back(std::move(s));
        else
            check_run(false, "dataset: unknown split tag '" + split + "' on line " +
                                 std::to_string(lineno));
    }
    return ds;
}

}  // namespace dcscan
