#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dcscan/augment.hpp"
#include "dcscan/image_io.hpp"
#include "dcscan/tensor_io.hpp"
#include "oracles.hpp"

using namespace dcscan;

namespace {

Tensor ramp_image(std::size_t h, std::size_t w) {
    Tensor img = Tensor::zeros({h, w});
    for (std::size_t i = 0; i < img.size(); ++i)
        img.data_mut()[i] = static_cast<double>(i) / static_cast<double>(img.size() - 1);
    return img;
}

Tensor random_image(std::size_t h, std::size_t w, Rng& rng) {
    Tensor img = Tensor::zeros({h, w});
    for (std::size_t i = 0; i < img.size(); ++i) img.data_mut()[i] = urand01(rng);
    return img;
}

const std::array<Dihedral, 8> kAllElems = {
    Dihedral::Identity, Dihedral::Rot90,  Dihedral::Rot180,    Dihedral::Rot270,
    Dihedral::FlipH,    Dihedral::FlipV,  Dihedral::Transpose, Dihedral::AntiTranspose};

}  // namespace

TEST_CASE("dihedral group identities") {
    Rng rng = make_rng(301);
    Tensor img = random_image(6, 6, rng);

    Tensor id = apply_dihedral(img, Dihedral::Identity);
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(id.at(i) == img.at(i));

    Tensor ff = apply_dihedral(apply_dihedral(img, Dihedral::FlipH), Dihedral::FlipH);
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(ff.at(i) == img.at(i));

    Tensor r4 = img;
    for (int k = 0; k < 4; ++k) r4 = apply_dihedral(r4, Dihedral::Rot90);
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(r4.at(i) == img.at(i));

    Tensor rect = random_image(3, 5, rng);
    CHECK_THROWS_AS(apply_dihedral(rect, Dihedral::Rot90), std::invalid_argument);
    Tensor fl = apply_dihedral(rect, Dihedral::FlipV);   // flips stay legal
    CHECK(fl.at(0) == rect.at(2 * 5 + 0));
}

TEST_CASE("geometric transform commutes between image and label") {
    Rng rng = make_rng(303);
    Tensor img = random_image(5, 5, rng);
    // label derived from image structure
    IntGrid lab = IntGrid::zeros({5, 5});
    for (std::size_t i = 0; i < img.size(); ++i) lab.v[i] = img.at(i) > 0.5 ? 1 : 0;
    for (Dihedral d : kAllElems) {
        Tensor ti = apply_dihedral(img, d);
        IntGrid tl = apply_dihedral(lab, d);
        for (std::size_t i = 0; i < ti.size(); ++i)
            CHECK(tl.v[i] == (ti.at(i) > 0.5 ? 1 : 0));
    }
}

TEST_CASE("photometric transforms") {
    AugmentConfig cfg;

    SUBCASE("alpha 0 is the identity") {
        cfg.alpha = 0.0;
        Rng rng = make_rng(305);
        std::vector<double> patch = {0.1, 0.4, 0.9, 0.6};
        std::vector<double> before = patch;
        strong_photometric(patch, 2, 2, cfg, rng);
        CHECK(patch == before);
    }

    SUBCASE("gamma 2 alone maps 0.5 to 0.25") {
        cfg.alpha = 1.0;
        cfg.blur_sigma_min = cfg.blur_sigma_max = 1e-9;   // delta kernel
        cfg.brightness_delta = 0.0;
        cfg.contrast_min = cfg.contrast_max = 1.0;
        cfg.gamma_min = cfg.gamma_max = 2.0;
        Rng rng = make_rng(307);
        std::vector<double> patch = {0.5};
        strong_photometric(patch, 1, 1, cfg, rng);
        CHECK(patch[0] == doctest::Approx(0.25).epsilon(1e-12));
    }

    SUBCASE("vanishing blur sigma is the identity") {
        cfg.alpha = 1.0;
        cfg.blur_sigma_min = cfg.blur_sigma_max = 1e-9;
        cfg.brightness_delta = 0.0;
        cfg.contrast_min = cfg.contrast_max = 1.0;
        cfg.gamma_min = cfg.gamma_max = 1.0;
        Rng rng = make_rng(309);
        std::vector<double> patch = {0.2, 0.7, 0.4, 0.55, 0.9, 0.05};
        std::vector<double> before = patch;
        strong_photometric(patch, 2, 3, cfg, rng);
        for (std::size_t i = 0; i < patch.size(); ++i)
            CHECK(patch[i] == doctest::Approx(before[i]).epsilon(1e-12));
    }

    SUBCASE("blur preserves constants everywhere including borders") {
        cfg.alpha = 1.0;
        cfg.blur_sigma_min = cfg.blur_sigma_max = 0.8;
        cfg.brightness_delta = 0.0;
        cfg.contrast_min = cfg.contrast_max = 1.0;
        cfg.gamma_min = cfg.gamma_max = 1.0;
        Rng rng = make_rng(311);
        std::vector<double> patch(20, 0.625);
        strong_photometric(patch, 4, 5, cfg, rng);
        for (double v : patch) CHECK(v == doctest::Approx(0.625).epsilon(1e-12));
    }

    SUBCASE("invalid ranges are rejected") {
        cfg.contrast_min = -1.0;
        Rng rng = make_rng(313);
        std::vector<double> patch = {0.5};
        CHECK_THROWS_AS(strong_photometric(patch, 1, 1, cfg, rng), std::invalid_argument);
    }
}

TEST_CASE("mix_augment collapses to identical views at alpha 0") {
    AugmentConfig cfg;
    cfg.alpha = 0.0;
    cfg.patch_size = 2;
    Rng rng = make_rng(315);
    Tensor img = random_image(8, 8, rng);
    AugmentedPair pair = mix_augment(img, nullptr, cfg, rng);
    REQUIRE(pair.view_a.shape() == img.shape());
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(pair.view_a.at(i) == pair.view_b.at(i));
}

TEST_CASE("complementarity and pixel alignment across seeds and patch sizes") {
    // deterministic contrast doubling as the only strong transform, so the
    // strong version of a patch is a known function of the weak one
    AugmentConfig cfg;
    cfg.alpha = 1.0;
    cfg.blur_sigma_min = cfg.blur_sigma_max = 1e-9;
    cfg.brightness_delta = 0.0;
    cfg.contrast_min = cfg.contrast_max = 2.0;
    cfg.gamma_min = cfg.gamma_max = 1.0;
    auto strong_of = [](double x) {
        return std::min(1.0, std::max(0.0, 0.5 + 2.0 * (x - 0.5)));
    };

    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        std::size_t h = 5 + seed % 5;                      // includes non-dividing sizes
        std::size_t d = 1 + seed % 4;
        cfg.patch_size = d;
        Rng gen = make_rng(317, seed);
        Tensor img = random_image(h, h, gen);
        IntGrid lab = IntGrid::zeros({h, h});
        for (std::size_t i = 0; i < img.size(); ++i) lab.v[i] = img.at(i) > 0.6 ? 1 : 0;

        Rng rng = make_rng(319, seed);
        AugmentedPair pair = mix_augment(img, &lab, cfg, rng);
        REQUIRE(pair.label.has_value());

        // reconstruct the shared geometric image from the label commutation:
        // find the dihedral element that maps (img, lab) onto pair.label
        Tensor geo;
        bool found = false;
        for (Dihedral e : kAllElems) {
            IntGrid tl = apply_dihedral(lab, e);
            if (tl.v == pair.label->v) {
                geo = apply_dihedral(img, e);
                found = true;
                break;
            }
        }
        REQUIRE(found);

        std::size_t nr = pair.strong_in_a.shape[0], nc = pair.strong_in_a.shape[1];
        REQUIRE(nr == h / d);
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t c = 0; c < h; ++c) {
                std::size_t pr = std::min(r / d, nr - 1), pc = std::min(c / d, nc - 1);
                bool a_strong = pair.strong_in_a.v[pr * nc + pc] == 1;
                double weak = geo.at(r * h + c);
                const Tensor& strong_view = a_strong ? pair.view_a : pair.view_b;
                const Tensor& weak_view = a_strong ? pair.view_b : pair.view_a;
                // exactly one view holds the strong version, the other the
                // untouched geometric pixels
                REQUIRE(weak_view.at(r * h + c) == weak);
                REQUIRE(strong_view.at(r * h + c) ==
                        doctest::Approx(strong_of(weak)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("patch size larger than the image is an error") {
    AugmentConfig cfg;
    cfg.patch_size = 9;
    Rng rng = make_rng(321);
    Tensor img = random_image(4, 4, rng);
    CHECK_THROWS_AS(mix_augment(img, nullptr, cfg, rng), std::invalid_argument);
}

TEST_CASE("golden views for seed 42, d = 2, 4x4 ramp") {
    AugmentConfig cfg;
    cfg.patch_size = 2;
    Rng rng = make_rng(42);
    AugmentedPair pair = mix_augment(ramp_image(4, 4), nullptr, cfg, rng);
    Tensor ga = read_dct1("data/golden_augment_a.dct1");
    Tensor gb = read_dct1("data/golden_augment_b.dct1");
    REQUIRE(ga.shape() == pair.view_a.shape());
    for (std::size_t i = 0; i < ga.size(); ++i) {
        CHECK(pair.view_a.at(i) == ga.at(i));
        CHECK(pair.view_b.at(i) == gb.at(i));
    }
}

TEST_CASE("pgm round trips") {
    Rng rng = make_rng(323);
    Tensor img = random_image(4, 4, rng);
    write_pgm("aug_t.pgm", img);
    Tensor back = read_pgm("aug_t.pgm");
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(back.at(i) - img.at(i)) <= 1.0 / 255.0 + 1e-12);

    // truncating quantizer: 0.5 lands on 127/255
    Tensor half = Tensor::full({1, 1}, 0.5);
    write_pgm("aug_half.pgm", half);
    CHECK(read_pgm("aug_half.pgm").item() == doctest::Approx(127.0 / 255.0).epsilon(1e-12));

    // all-zero 4x4 file is exactly header + 16 payload bytes
    write_pgm("aug_z.pgm", Tensor::zeros({4, 4}));
    CHECK(std::filesystem::file_size("aug_z.pgm") == std::string("P5\n4 4\n255\n").size() + 16);

    IntGrid g = IntGrid::zeros({2, 3});
    g.v = {0, 1, 2, 3, 4, 5};
    write_pgm_indexed("aug_g.pgm", g);
    CHECK(read_pgm_indexed("aug_g.pgm").v == g.v);

    {
        std::ofstream f("aug_bad.pgm", std::ios::binary);
        f << "P5\n4 nope\n255\n";
    }
    CHECK_THROWS_WITH_AS(read_pgm("aug_bad.pgm"), doctest::Contains("byte"),
                         std::runtime_error);
    for (const char* p : {"aug_t.pgm", "aug_half.pgm", "aug_z.pgm", "aug_g.pgm", "aug_bad.pgm"})
        std::remove(p);
}
