#include "dcscan/network.hpp"

#include <cmath>

namespace dcscan {

namespace {

Tensor uniform_init(Shape shape, double scale, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t.data_mut()[i] = urand_range(rng, -scale, scale);
    return t;
}

// Affine projection over the channel (last) axis, shape-preserving elsewhere.
Tensor project(const Tensor& x, const Tensor& w, const Tensor& b) {
    std::size_t cin = x.shape().back();
    std::size_t rows = x.size() / cin;
    Tensor flat = matmul(reshape(x, {rows, cin}), w);
    Shape out_shape = x.shape();
    out_shape.back() = w.extent(1);
    return reshape(add(flat, b), out_shape);
}

}  // namespace

VssBlock VssBlock::init(std::size_t channels, RouteSetKind routes, std::size_t expansion,
                        std::size_t state_dim, Rng& rng) {
    check_arg(channels >= 1 && expansion >= 1, "vss: bad widths");
    VssBlock b;
    b.channels = channels;
    b.inner = expansion * channels;
    b.routes = routes;
    b.ln_gain = Tensor::full({channels}, 1.0);
    b.ln_bias = Tensor::zeros({channels});
    double sc = 1.0 / std::sqrt(static_cast<double>(channels));
    b.w_in = uniform_init({channels, b.inner}, sc, rng);
    b.dw_kernels = uniform_init({3, 3, b.inner}, 1.0 / 3.0, rng);
    b.w_gate = uniform_init({channels, b.inner}, sc, rng);
    for (auto& p : b.ssm) p = SsmParams::init(b.inner, state_dim, rng);
    b.post_gain = Tensor::full({b.inner}, 1.0);
    b.post_bias = Tensor::zeros({b.inner});
    b.w_out = uniform_init({b.inner, channels}, 1.0 / std::sqrt(static_cast<double>(b.inner)),
                           rng);
    return b;
}

void VssBlock::collect(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".ln_gain", ln_gain});
    out.push_back({prefix + ".ln_bias", ln_bias});
    out.push_back({prefix + ".w_in", w_in});
    out.push_back({prefix + ".dw_kernels", dw_kernels});
    out.push_back({prefix + ".w_gate", w_gate});
    for (std::size_t k = 0; k < 4; ++k) ssm[k].collect(prefix + ".ssm" + std::to_string(k), out);
    out.push_back({prefix + ".post_gain", post_gain});
    out.push_back({prefix + ".post_bias", post_bias});
    out.push_back({prefix + ".w_out", w_out});
}

VssOut vss_block_forward(VssBlock& block, const Tensor& x) {
    check_arg(x.shape().back() == block.channels,
              "vss: input channels do not match the block");
    std::size_t cin = block.channels;
    std::size_t rows = x.size() / cin;
    Tensor y = layernorm(x, block.ln_gain, block.ln_bias, 1e-5);
    Tensor y2 = reshape(y, {rows, cin});

    Shape inner_shape = x.shape();
    inner_shape.back() = block.inner;
    Tensor u = reshape(matmul(y2, block.w_in), inner_shape);
    u = silu(depthwise_conv2d(u, block.dw_kernels));

    Ss2dResult scan = ss2d_forward(block.routes, block.ssm, u);
    Tensor s = layernorm(scan.out, block.post_gain, block.post_bias, 1e-5);
    Tensor g = silu(reshape(matmul(y2, block.w_gate), inner_shape));
    Tensor fused = reshape(mul(s, g), {rows, block.inner});
    Tensor out = add(reshape(matmul(fused, block.w_out), x.shape()), x);
    return {out, scan.route_feats};
}

SegNetwork SegNetwork::init(const NetworkConfig& cfg, RouteSetKind routes,
                            std::uint64_t seed) {
    check_arg(cfg.base_channels >= 1 && cfg.encoder_stages >= 1 && cfg.num_classes >= 2,
              "network: bad config");
    Rng rng = make_rng(seed, 0x5e9);
    SegNetwork net;
    net.cfg = cfg;
    net.routes = routes;

    std::size_t c0 = cfg.base_channels;
    net.embed_w = uniform_init({4 * cfg.in_channels, c0},
                               1.0 / std::sqrt(4.0 * static_cast<double>(cfg.in_channels)), rng);
    net.embed_b = Tensor::zeros({c0});
    for (std::size_t s = 0; s < cfg.encoder_stages; ++s) {
        std::size_t ch = c0 << s;
        net.enc_blocks.push_back(
            VssBlock::init(ch, routes, cfg.expansion, cfg.state_dim, rng));
        net.down_w.push_back(
            uniform_init({4 * ch, 2 * ch}, 1.0 / std::sqrt(4.0 * static_cast<double>(ch)), rng));
        net.down_b.push_back(Tensor::zeros({2 * ch}));
    }
    std::size_t cb = c0 << cfg.encoder_stages;
    net.bottleneck = VssBlock::init(cb, routes, cfg.expansion, cfg.state_dim, rng);
    for (std::size_t s = cfg.encoder_stages; s-- > 0;) {
        std::size_t ch = c0 << s;
        net.up_w.push_back(
            uniform_init({2 * ch, ch}, 1.0 / std::sqrt(2.0 * static_cast<double>(ch)), rng));
        net.up_b.push_back(Tensor::zeros({ch}));
        net.fuse_w.push_back(
            uniform_init({2 * ch, ch}, 1.0 / std::sqrt(2.0 * static_cast<double>(ch)), rng));
        net.fuse_b.push_back(Tensor::zeros({ch}));
        net.dec_blocks.push_back(
            VssBlock::init(ch, routes, cfg.expansion, cfg.state_dim, rng));
    }
    net.final_up_w = uniform_init({c0, c0}, 1.0 / std::sqrt(static_cast<double>(c0)), rng);
    net.final_up_b = Tensor::zeros({c0});
    net.final_fuse_w =
        uniform_init({c0 + cfg.in_channels, c0},
                     1.0 / std::sqrt(static_cast<double>(c0 + cfg.in_channels)), rng);
    net.final_fuse_b = Tensor::zeros({c0});
    net.head_w = uniform_init({c0, cfg.num_classes}, 1.0 / std::sqrt(static_cast<double>(c0)), rng);
    net.head_b = Tensor::zeros({cfg.num_classes});
    return net;
}

std::vector<NamedParam> SegNetwork::params() {
    std::vector<NamedParam> out;
    out.push_back({"embed.w", embed_w});
    out.push_back({"embed.b", embed_b});
    for (std::size_t s = 0; s < enc_blocks.size(); ++s) {
        enc_blocks[s].collect("enc" + std::to_string(s), out);
        out.push_back({"down" + std::to_string(s) + ".w", down_w[s]});
        out.push_back({"down" + std::to_string(s) + ".b", down_b[s]});
    }
    bottleneck.collect("bneck", out);
    for (std::size_t s = 0; s < dec_blocks.size(); ++s) {
        out.push_back({"up" + std::to_string(s) + ".w", up_w[s]});
        out.push_back({"up" + std::to_string(s) + ".b", up_b[s]});
        out.push_back({"fuse" + std::to_string(s) + ".w", fuse_w[s]});
        out.push_back({"fuse" + std::to_string(s) + ".b", fuse_b[s]});
        dec_blocks[s].collect("dec" + std::to_string(s), out);
    }
    out.push_back({"final_up.w", final_up_w});
    out.push_back({"final_up.b", final_up_b});
    out.push_back({"final_fuse.w", final_fuse_w});
    out.push_back({"final_fuse.b", final_fuse_b});
    out.push_back({"head.w", head_w});
    out.push_back({"head.b", head_b});
    return out;
}

std::size_t SegNetwork::param_count() {
    std::size_t n = 0;
    for (auto& p : params()) n += p.tensor.size();
    return n;
}

NetworkOut network_forward(SegNetwork& net, const Tensor& image) {
    bool batched = image.rank() == 4;
    check_arg(batched || image.rank() == 3, "network: image must be [H,W,C] or [B,H,W,C]");
    check_arg(image.shape().back() == net.cfg.in_channels,
              "network: image channel count mismatch");
    std::size_t h = image.extent(batched ? 1 : 0);
    std::size_t w = image.extent(batched ? 2 : 1);
    std::size_t f = net.cfg.downsample_factor();
    check_arg(h % f == 0 && w % f == 0,
              "network: extents " + std::to_string(h) + "x" + std::to_string(w) +
                  " not divisible by the downsampling factor " + std::to_string(f));

    Tensor x = image;
    if (!batched) x = reshape(x, {1, h, w, net.cfg.in_channels});
    Tensor full_res = x;

    x = project(space_to_depth2(x), net.embed_w, net.embed_b);
    std::vector<Tensor> skips;
    for (std::size_t s = 0; s < net.enc_blocks.size(); ++s) {
        x = vss_block_forward(net.enc_blocks[s], x).out;
        skips.push_back(x);
        x = project(space_to_depth2(x), net.down_w[s], net.down_b[s]);
    }
    VssOut mid = vss_block_forward(net.bottleneck, x);
    x = mid.out;
    for (std::size_t s = 0; s < net.dec_blocks.size(); ++s) {
        x = project(upsample_nearest2(x), net.up_w[s], net.up_b[s]);
        x = project(concat_lastaxis(x, skips[skips.size() - 1 - s]), net.fuse_w[s],
                    net.fuse_b[s]);
        x = vss_block_forward(net.dec_blocks[s], x).out;
    }
    x = project(upsample_nearest2(x), net.final_up_w, net.final_up_b);
    x = project(concat_lastaxis(x, full_res), net.final_fuse_w, net.final_fuse_b);
    x = silu(x);
    Tensor logits = project(x, net.head_w, net.head_b);
    if (!batched) logits = reshape(logits, {h, w, net.cfg.num_classes});
    return {logits, mid.route_feats};
}

Projector Projector::init(std::size_t in_dim, std::size_t width, Rng& rng) {
    check_arg(in_dim >= 1 && width >= 1, "projector: bad widths");
    Projector p;
    p.in_dim = in_dim;
    p.width = width;
    p.w1 = uniform_init({in_dim, width}, 1.0 / std::sqrt(static_cast<double>(in_dim)), rng);
    p.b1 = Tensor::zeros({width});
    p.w2 = uniform_init({width, width}, 1.0 / std::sqrt(static_cast<double>(width)), rng);
    p.b2 = Tensor::zeros({width});
    return p;
}

std::vector<NamedParam> Projector::params() {
    return {{"w1", w1}, {"b1", b1}, {"w2", w2}, {"b2", b2}};
}

Tensor projector_forward(Projector& p, const Tensor& fused) {
    bool batched = fused.rank() == 4;
    check_arg(batched || fused.rank() == 3, "projector: input must be [h,w,C] or [B,h,w,C]");
    check_arg(fused.shape().back() == p.in_dim, "projector: feature width mismatch");
    Tensor x = batched ? fused
                       : reshape(fused, {1, fused.extent(0), fused.extent(1), p.in_dim});
    Tensor pooled = mean(x, {1, 2});   // [B,C]
    Tensor h1 = silu(add(matmul(pooled, p.w1), p.b1));
    return add(matmul(h1, p.w2), p.b2);
}

}  // namespace dcscan
