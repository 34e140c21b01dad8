#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "dcscan/checkpoint.hpp"
#include "dcscan/gradcheck.hpp"
#include "dcscan/network.hpp"
#include "oracles.hpp"

using namespace dcscan;

namespace {

NetworkConfig tiny_config() {
    NetworkConfig cfg;
    cfg.base_channels = 4;
    cfg.state_dim = 2;
    return cfg;
}

}  // namespace

TEST_CASE("vss block is the identity when all projections are zero") {
    Rng rng = make_rng(201);
    VssBlock b = VssBlock::init(3, RouteSetKind::HV, 2, 2, rng);
    for (Tensor t : {b.w_in, b.w_gate, b.w_out})
        for (std::size_t i = 0; i < t.size(); ++i) t.data_mut()[i] = 0.0;
    Tensor x = oracle::random_tensor({1, 4, 4, 3}, rng);
    VssOut out = vss_block_forward(b, x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(out.out.at(i) == x.at(i));
}

TEST_CASE("vss block keeps the input shape") {
    Rng rng = make_rng(203);
    VssBlock b = VssBlock::init(5, RouteSetKind::DA, 2, 3, rng);
    Tensor x = oracle::random_tensor({2, 3, 6, 5}, rng);
    VssOut out = vss_block_forward(b, x);
    CHECK(out.out.shape() == x.shape());
    for (auto& z : out.route_feats) CHECK(z.shape() == Shape{2, 3, 6, 10});
}

TEST_CASE("vss block end-to-end gradient") {
    Rng rng = make_rng(207);
    VssBlock b = VssBlock::init(2, RouteSetKind::HV, 2, 2, rng);
    Tensor x = oracle::random_tensor({4, 4, 2}, rng, 0.5);
    std::vector<NamedParam> ps;
    b.collect("b", ps);
    auto f = [&b](const std::vector<Tensor>& v) {
        return sum(vss_block_forward(b, reshape(v[0], {1, 4, 4, 2})).out);
    };
    CHECK(grad_check(f, {x}) < 1e-4);
    // and through a couple of parameters
    auto fp = [&b, &x] { return sum(vss_block_forward(b, reshape(x, {1, 4, 4, 2})).out); };
    CHECK(grad_check_params(fp, {b.w_in, b.ssm[0].a_log, b.ssm[2].w_c, b.dw_kernels}) < 1e-4);
}

TEST_CASE("network forward shape contract and divisibility errors") {
    SegNetwork net = SegNetwork::init(tiny_config(), RouteSetKind::HV, 7);
    Rng rng = make_rng(209);
    Tensor img = oracle::random_tensor({32, 32, 1}, rng);
    NetworkOut out = network_forward(net, img);
    CHECK(out.logits.shape() == Shape{32, 32, 2});
    for (auto& z : out.route_feats) CHECK(z.shape() == Shape{1, 8, 8, 16});

    Tensor batch = oracle::random_tensor({3, 16, 16, 1}, rng);
    CHECK(network_forward(net, batch).logits.shape() == Shape{3, 16, 16, 2});

    Tensor odd = oracle::random_tensor({10, 10, 1}, rng);
    CHECK_THROWS_WITH_AS(network_forward(net, odd), doctest::Contains("divisible"),
                         std::invalid_argument);
}

TEST_CASE("identical weights with different route sets diverge") {
    NetworkConfig cfg = tiny_config();
    SegNetwork a = SegNetwork::init(cfg, RouteSetKind::HV, 7);
    SegNetwork b = SegNetwork::init(cfg, RouteSetKind::DA, 7);   // same seed, same weights
    auto pa = a.params();
    auto pb = b.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i)
        for (std::size_t j = 0; j < pa[i].tensor.size(); ++j)
            REQUIRE(pa[i].tensor.at(j) == pb[i].tensor.at(j));

    Rng rng = make_rng(211);
    Tensor img = oracle::random_tensor({16, 16, 1}, rng);
    Tensor la = network_forward(a, img).logits;
    Tensor lb = network_forward(b, img).logits;
    double diff = 0.0;
    for (std::size_t i = 0; i < la.size(); ++i)
        diff = std::max(diff, std::abs(la.at(i) - lb.at(i)));
    CHECK(diff > 1e-8);
}

TEST_CASE("forward passes are bitwise deterministic") {
    SegNetwork net = SegNetwork::init(tiny_config(), RouteSetKind::DA, 13);
    Rng rng = make_rng(213);
    Tensor img = oracle::random_tensor({16, 16, 1}, rng);
    Tensor l1 = network_forward(net, img).logits;
    Tensor l2 = network_forward(net, img).logits;
    for (std::size_t i = 0; i < l1.size(); ++i) REQUIRE(l1.at(i) == l2.at(i));
}

TEST_CASE("desk config stays under 100k parameters") {
    NetworkConfig desk;  // defaults
    SegNetwork net = SegNetwork::init(desk, RouteSetKind::HV, 1);
    CHECK(net.param_count() < 100000);
    CHECK(net.param_count() > 1000);
}

TEST_CASE("network gradient on a sampled parameter subset") {
    NetworkConfig cfg = tiny_config();
    SegNetwork net = SegNetwork::init(cfg, RouteSetKind::HV, 23);
    Rng rng = make_rng(217);
    Tensor img = oracle::random_tensor({8, 8, 1}, rng);

    // a handful of parameters spread over the whole net
    auto f = [&net, &img] { return sum(network_forward(net, img).logits); };
    CHECK(grad_check_params(f, {net.embed_w, net.bottleneck.ssm[1].w_b, net.head_w,
                                net.dec_blocks[0].w_gate}) < 1e-4);
}

TEST_CASE("projector forward and gradient") {
    Rng rng = make_rng(219);
    Projector p = Projector::init(6, 16, rng);

    Tensor zero = Tensor::zeros({2, 3, 3, 6});
    Tensor out = projector_forward(p, zero);
    CHECK(out.shape() == Shape{2, 16});
    // zero biases keep the zero input at zero
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.at(i) == 0.0);

    // constant feature map pools to the constant exactly
    Tensor c = Tensor::full({1, 4, 4, 6}, 0.375);
    Tensor pooled = mean(c, {1, 2});
    for (std::size_t i = 0; i < pooled.size(); ++i) CHECK(pooled.at(i) == 0.375);

    Tensor feat = oracle::random_tensor({2, 3, 3, 6}, rng);
    auto f = [&p](const std::vector<Tensor>& v) {
        Projector q = p;
        q.w1 = v[1];
        q.b1 = v[2];
        q.w2 = v[3];
        q.b2 = v[4];
        return sum(projector_forward(q, v[0]));
    };
    CHECK(grad_check(f, {feat, p.w1, p.b1, p.w2, p.b2}) < 1e-6);
}

TEST_CASE("checkpoint round trip preserves outputs bitwise") {
    NetworkConfig cfg = tiny_config();
    SegNetwork net = SegNetwork::init(cfg, RouteSetKind::DA, 31);
    Rng rng = make_rng(221);
    Tensor img = oracle::random_tensor({16, 16, 1}, rng);
    Tensor before = network_forward(net, img).logits;

    std::string dir = "ckpt_test_net";
    save_network(dir, net);
    SegNetwork loaded = load_network(dir);
    CHECK(loaded.routes == RouteSetKind::DA);
    Tensor after = network_forward(loaded, img).logits;
    for (std::size_t i = 0; i < before.size(); ++i) REQUIRE(after.at(i) == before.at(i));

    Projector proj = Projector::init(8, 16, rng);
    save_projector("ckpt_test_proj", proj);
    Projector pl = load_projector("ckpt_test_proj");
    for (std::size_t i = 0; i < proj.w1.size(); ++i) REQUIRE(pl.w1.at(i) == proj.w1.at(i));

    std::filesystem::remove_all(dir);
    std::filesystem::remove_all("ckpt_test_proj");
}
