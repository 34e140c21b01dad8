#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dcscan/routes.hpp"
#include "dcscan/ssm.hpp"

namespace dcscan {

// Simplified visual state-space block: LN, gated SS2D over an expanded inner
// width, LN, output projection, residual. Route features come back
// grid-aligned for the fusion losses.
struct VssBlock {
    std::size_t channels = 0;
    std::size_t inner = 0;   // expansion * channels
    RouteSetKind routes = RouteSetKind::HV;
    Tensor ln_gain, ln_bias;       // [C]
    Tensor w_in;                   // [C,E]
    Tensor dw_kernels;             // [3,3,E]
    Tensor w_gate;                 // [C,E]
    std::array<SsmParams, 4> ssm;
    Tensor post_gain, post_bias;   // [E]
    Tensor w_out;                  // [E,C]

    static VssBlock init(std::size_t channels, RouteSetKind routes, std::size_t expansion,
                         std::size_t state_dim, Rng& rng);
    void collect(const std::string& prefix, std::vector<NamedParam>& out);
};

struct VssOut {
    Tensor out;                          // same shape as the input
    std::array<Tensor, 4> route_feats;   // [B,H,W,E] each
};

// out = (LN(ss2d(silu(dwconv(LN(x) W_in)))) . silu(LN(x) W_gate)) W_out + x
VssOut vss_block_forward(VssBlock& block, const Tensor& x);

struct NetworkConfig {
    std::size_t in_channels = 1;
    std::size_t base_channels = 8;
    std::size_t encoder_stages = 1;
    std::size_t num_classes = 2;
    std::size_t expansion = 2;
    std::size_t state_dim = 4;

    // patch embed halves the grid once, each encoder stage once more
    std::size_t downsample_factor() const { return std::size_t{1} << (encoder_stages + 1); }
};

// U-shaped segmentation network: strided patch embed, VSS encoder stages with
// 2x downsampling, a bottleneck VSS block (route features exposed), and a
// mirrored decoder with nearest-neighbor upsampling and skip concatenation.
struct SegNetwork {
    NetworkConfig cfg;
    RouteSetKind routes = RouteSetKind::HV;
    Tensor embed_w, embed_b;
    std::vector<VssBlock> enc_blocks;
    std::vector<Tensor> down_w, down_b;
    VssBlock bottleneck;
    std::vector<Tensor> up_w, up_b;
    std::vector<Tensor> fuse_w, fuse_b;
    std::vector<VssBlock> dec_blocks;
    // final stage mirrors the patch embed; the raw image is its skip
    Tensor final_up_w, final_up_b;
    Tensor final_fuse_w, final_fuse_b;
    Tensor head_w, head_b;

    static SegNetwork init(const NetworkConfig& cfg, RouteSetKind routes, std::uint64_t seed);
    std::vector<NamedParam> params();
    std::size_t param_count();
    std::size_t bottleneck_channels() const {
        return cfg.base_channels << cfg.encoder_stages;
    }
    // inner width of the bottleneck block = width of the fused route features
    std::size_t bottleneck_feature_dim() const {
        return cfg.expansion * bottleneck_channels();
    }
};

struct NetworkOut {
    Tensor logits;                       // [.., H, W, num_classes]
    std::array<Tensor, 4> route_feats;   // bottleneck route features
};

// image: [H,W,in] or [B,H,W,in]; H and W must be divisible by the total
// downsampling factor.
NetworkOut network_forward(SegNetwork& net, const Tensor& image);

// Two affine layers with silu between, applied to the globally
// average-pooled fused feature. Output width 16 per image.
struct Projector {
    std::size_t in_dim = 0;
    std::size_t width = 16;
    Tensor w1, b1, w2, b2;

    static Projector init(std::size_t in_dim, std::size_t width, Rng& rng);
    std::vector<NamedParam> params();
};

// fused: [B,h,w,C] (or [h,w,C]) -> [B,width]
Tensor projector_forward(Projector& p, const Tensor& fused);

}  // namespace dcscan
