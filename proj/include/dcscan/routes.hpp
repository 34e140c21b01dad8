#pragma once

#include <array>
#include <string>

#include "dcscan/ssm.hpp"
#include "dcscan/tensor.hpp"

namespace dcscan {

// The eight scan directions over an HxW grid; each -bwd ordering is the exact
// reversal of its -fwd ordering.
enum class ScanDirection { HFwd, HBwd, VFwd, VBwd, DFwd, DBwd, ADFwd, ADBwd };

std::string to_string(ScanDirection d);

// A network owns one of the two four-route sets.
enum class RouteSetKind { HV, DA };

std::array<ScanDirection, 4> route_set_directions(RouteSetKind kind);
std::string to_string(RouteSetKind kind);
RouteSetKind route_set_from_string(const std::string& s);

// Bijective visit order of the H*W cells for one direction.
struct RoutePermutation {
    std::size_t h = 0, w = 0;
    std::vector<std::size_t> order;   // order[i] = flat cell index visited i-th
};

// H-fwd is row-major, V-fwd column-major. D-fwd visits by ascending r+c with
// row-ascending tie-break; AD-fwd by ascending r+(W-1-c), same tie-break.
RoutePermutation route_order(ScanDirection dir, std::size_t h, std::size_t w);

// Gather a grid into a sequence along the route, and scatter back.
// grid: [H,W,C] or [B,H,W,C]; seq: [L,C] or [B,L,C] with L = H*W.
// invert_route(apply_route(x)) == x exactly; both are differentiable.
Tensor apply_route(const RoutePermutation& perm, const Tensor& grid);
Tensor invert_route(const RoutePermutation& perm, const Tensor& seq);

struct Ss2dResult {
    Tensor out;                          // sum of the four route outputs
    std::array<Tensor, 4> route_feats;   // grid-aligned z_k, kept for fusion
};

// Runs the four scans of a route set with per-route parameters and sums the
// grid-aligned results (fixed order k = 1..4).
Ss2dResult ss2d_forward(RouteSetKind kind, std::array<SsmParams, 4>& params,
                        const Tensor& grid);

}  // namespace dcscan
