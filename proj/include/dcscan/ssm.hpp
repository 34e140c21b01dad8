#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dcscan/ops.hpp"
#include "dcscan/tensor.hpp"

namespace dcscan {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

// Learned parameters of one selective-scan route over C channels with an
// N-dimensional state. A = -exp(a_log) stays elementwise negative, so the
// discrete recurrence decays. The timescale projection is rank-1 with a
// shared per-channel bias whose init puts softplus output near 0.5.
struct SsmParams {
    std::size_t channels = 0;
    std::size_t state_dim = 0;
    Tensor a_log;       // [C,N]
    Tensor skip_d;      // [C]
    Tensor w_dt_down;   // [C,1]
    Tensor w_dt_up;     // [1,C]
    Tensor b_dt;        // [C]
    Tensor w_b;         // [C,N]
    Tensor w_c;         // [C,N]

    static SsmParams init(std::size_t channels, std::size_t state_dim, Rng& rng);
    void collect(const std::string& prefix, std::vector<NamedParam>& out);
};

// Per-step scan inputs: u and delta are [L,C] or [B,L,C]; the input-dependent
// B and C projections are [L,N] / [B,L,N]. delta must be positive.
struct ScanInputs {
    Tensor u;
    Tensor delta;
    Tensor b_seq;
    Tensor c_seq;
};

// Zero-order hold: Abar = exp(delta*A) and
// Bbar = (delta*A)^-1 (exp(delta*A) - 1) * delta*B, both elementwise over the
// diagonal state. For |delta*A| < 1e-6 the Taylor form
// Bbar = delta*B*(1 + x/2 + x^2/6) avoids the 0/0. a: [C,N]; delta: [...,L,C];
// b_seq: [...,L,N]; results [...,L,C,N].
std::pair<Tensor, Tensor> discretize_zoh(const Tensor& a, const Tensor& b_seq,
                                         const Tensor& delta);

// The recurrence h_t = Abar_t . h_{t-1} + Bbar_t u_t, y_t = <C_t, h_t> + D u_t
// per channel, h_0 = 0. Fused forward/backward node (BPTT over stored states).
Tensor selective_scan_core(const Tensor& abar, const Tensor& bbar, const Tensor& u,
                           const Tensor& c_seq, const Tensor& skip_d);

// Full selective scan: discretize then run the recurrence.
Tensor selective_scan(const SsmParams& params, const ScanInputs& inputs);

// Input-dependent parameterization: delta = softplus(u w_dt + b_dt) (rank-1
// projection), B = u W_B, C = u W_C.
ScanInputs s6_parameterize(const SsmParams& params, const Tensor& u);

}  // namespace dcscan
