#pragma once

#include <utility>

#include "dcscan/tensor.hpp"

namespace dcscan {

// Elementwise binary ops broadcast over trailing-compatible shapes
// (NumPy-style: align from the right, extents must match or be 1).
// Gradients of broadcast inputs are summed back to the pre-broadcast shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor pow(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double s);
Tensor sub(const Tensor& a, double s);
Tensor sub(double s, const Tensor& a);
Tensor mul(const Tensor& a, double s);
Tensor div(const Tensor& a, double s);
Tensor div(double s, const Tensor& a);
Tensor pow(const Tensor& a, double s);

Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);        // error on non-positive input
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor silu(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return sub(a, s); }
inline Tensor operator*(const Tensor& a, double s) { return mul(a, s); }
inline Tensor operator/(const Tensor& a, double s) { return div(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// a[m x k] * b[k x n] -> [m x n]; dA = dY.B^T, dB = A^T.dY.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& a);

// Reductions. axes empty = all axes. Mean backward distributes 1/n.
Tensor sum(const Tensor& a, const std::vector<std::size_t>& axes = {}, bool keepdim = false);
Tensor mean(const Tensor& a, const std::vector<std::size_t>& axes = {}, bool keepdim = false);

// Max over the last axis with first-max tie-break; backward routes the
// gradient to the argmax positions.
struct MaxResult {
    Tensor values;   // input shape minus last axis
    IntGrid argmax;
};
MaxResult max_lastaxis(const Tensor& a);

// Zero-mean unit-variance over the last axis (population variance), then
// gain/bias. gain and bias have the extent of the last axis.
Tensor layernorm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps = 1e-6);

// Per-channel 3x3 correlation with same zero padding.
// a: [H,W,C] or [B,H,W,C]; kernels: [3,3,C].
Tensor depthwise_conv2d(const Tensor& a, const Tensor& kernels);

// log(softmax) over the last axis, max-shifted for stability.
Tensor log_softmax_lastaxis(const Tensor& a);
Tensor softmax_lastaxis(const Tensor& a);

// out[i] = a[i, idx[i]] over the last axis (a flattened to [rows, cls]).
Tensor gather_lastaxis(const Tensor& a, const IntGrid& idx);
Tensor channel_at(const Tensor& a, std::size_t c);   // a[..., c]

// Shape plumbing (all materialize copies).
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_lastaxis(const Tensor& a, const Tensor& b);
Tensor slice_axis0(const Tensor& a, std::size_t start, std::size_t count);

// Row gather/scatter by a bijective permutation of axis -2 ... used by the
// scan routes. gather: out[r] = x[perm[r]]; scatter: out[perm[r]] = x[r].
// x: [R,C] or [B,R,C]; perm has length R.
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& perm);
Tensor scatter_rows(const Tensor& x, const std::vector<std::size_t>& perm);

// [B,H,W,C] -> [B,2H,2W,C] nearest neighbor; backward sums the 2x2 cells.
Tensor upsample_nearest2(const Tensor& x);
// [B,H,W,C] -> [B,H/2,W/2,4C]; error if H or W is odd.
Tensor space_to_depth2(const Tensor& x);
// [B,H,W,4C] -> [B,2H,2W,C]; exact inverse of space_to_depth2.
Tensor depth_to_space2(const Tensor& x);

}  // namespace dcscan
