#include <algorithm>
#include <cmath>

#include "dcscan/ops.hpp"

namespace dcscan {

namespace {

void ensure_finite(const Tensor& t, const char* op) {
    const double* p = t.data();
    std::size_t n = t.size();
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) ok &= std::isfinite(p[i]) ? true : false;
    if (!ok)
        throw std::runtime_error(std::string(op) +
                                 ": non-finite value produced (overflow or domain error)");
}

bool recording(const Tensor& a) { return Tape::current() && a.requires_grad(); }
bool recording(const Tensor& a, const Tensor& b) {
    return Tape::current() && (a.requires_grad() || b.requires_grad());
}

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
    parallel_for(m, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double* crow = c + i * n;
            for (std::size_t p = 0; p < k; ++p) {
                double av = a[i * k + p];
                if (av == 0.0) continue;
                const double* brow = b + p * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }, m * k * n);
}

// C[m,n] += A[m,k] * B[n,k]^T  (dot of contiguous rows)
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
    parallel_for(m, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double* ar = a + i * k;
                const double* br = b + j * k;
                double acc = 0.0;
                for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
                c[i * n + j] += acc;
            }
        }
    }, m * k * n);
}

// C[m,n] += A[k,m]^T * B[k,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_arg(a.rank() == 2 && b.rank() == 2, "matmul: both inputs must be rank 2");
    std::size_t m = a.extent(0), k = a.extent(1), k2 = b.extent(0), n = b.extent(1);
    check_arg(k == k2, "matmul: inner extents differ, " + shape_str(a.shape()) + " vs " +
                           shape_str(b.shape()));
    Tensor out = Tensor::zeros({m, n});
    gemm_nn(a.data(), b.data(), out.data_mut(), m, k, n);
    ensure_finite(out, "matmul");
    if (recording(a, b)) {
        out.set_requires_grad(true);
        Tensor ac = a, bc = b, oc = out;
        Tape::current()->record([ac, bc, oc, m, k, n]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            if (ac.requires_grad()) gemm_nt(g, bc.data(), ac.grad_mut().data(), m, n, k);
            if (bc.requires_grad()) gemm_tn(ac.data(), g, bc.grad_mut().data(), k, m, n);
        });
    }
    return out;
}

Tensor transpose2d(const Tensor& a) {
    check_arg(a.rank() == 2, "transpose2d: input must be rank 2");
    std::size_t m = a.extent(0), n = a.extent(1);
    Tensor out = Tensor::uninitialized({n, m});
    const double* pa = a.data();
    double* o = out.data_mut();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) o[j * m + i] = pa[i * n + j];
    if (recording(a)) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        Tape::current()->record([ac, oc, m, n]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            double* ga = ac.grad_mut().data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
        });
    }
    return out;
}

Tensor layernorm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
    check_arg(a.rank() >= 1, "layernorm: rank-0 input");
    check_arg(eps > 0.0, "layernorm: eps must be positive");
    std::size_t n = a.shape().back();
    check_arg(gain.rank() == 1 && gain.extent(0) == n, "layernorm: gain extent mismatch");
    check_arg(bias.rank() == 1 && bias.extent(0) == n, "layernorm: bias extent mismatch");
    std::size_t rows = a.size() / n;
    Tensor out = Tensor::uninitialized(a.shape());
    std::vector<double> mu(rows), istd(rows);
    {
        const double* pa = a.data();
        const double* pg = gain.data();
        const double* pb = bias.data();
        double* o = out.data_mut();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* row = pa + r * n;
            double m = 0.0;
            for (std::size_t j = 0; j < n; ++j) m += row[j];
            m /= static_cast<double>(n);
            double v = 0.0;
            for (std::size_t j = 0; j < n; ++j) v += (row[j] - m) * (row[j] - m);
            v /= static_cast<double>(n);
            double is = 1.0 / std::sqrt(v + eps);
            mu[r] = m;
            istd[r] = is;
            for (std::size_t j = 0; j < n; ++j)
                o[r * n + j] = pg[j] * (row[j] - m) * is + pb[j];
        }
    }
    ensure_finite(out, "layernorm");
    if (Tape::current() &&
        (a.requires_grad() || gain.requires_grad() || bias.requires_grad())) {
        out.set_requires_grad(true);
        Tensor ac = a, gc = gain, bc = bias, oc = out;
        Tape::current()->record([ac, gc, bc, oc, mu, istd, rows, n]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            const double* pa = ac.data();
            const double* pg = gc.data();
            double* ga = ac.requires_grad() ? ac.grad_mut().data() : nullptr;
            double* gg = gc.requires_grad() ? gc.grad_mut().data() : nullptr;
            double* gb = bc.requires_grad() ? bc.grad_mut().data() : nullptr;
            std::vector<double> xhat(n), dyhat(n);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* row = pa + r * n;
                const double* grow = g + r * n;
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    xhat[j] = (row[j] - mu[r]) * istd[r];
                    dyhat[j] = grow[j] * pg[j];
                    m1 += dyhat[j];
                    m2 += dyhat[j] * xhat[j];
                }
                m1 /= static_cast<double>(n);
                m2 /= static_cast<double>(n);
                for (std::size_t j = 0; j < n; ++j) {
                    if (ga) ga[r * n + j] += istd[r] * (dyhat[j] - m1 - xhat[j] * m2);
                    if (gg) gg[j] += grow[j] * xhat[j];
                    if (gb) gb[j] += grow[j];
                }
            }
        });
    }
    return out;
}

namespace {

// Shared 3x3 depthwise correlation kernels; grids are [B,H,W,C] flattened.
void dwconv_forward(const double* in, const double* ker, double* out, std::size_t bs,
                    std::size_t h, std::size_t w, std::size_t c) {
    parallel_for(bs * h, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t bi = lo; bi < hi; ++bi) {
            std::size_t b = bi / h, i = bi % h;
            for (std::size_t j = 0; j < w; ++j) {
                double* o = out + ((b * h + i) * w + j) * c;
                for (int di = -1; di <= 1; ++di) {
                    for (int dj = -1; dj <= 1; ++dj) {
                        std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i) + di;
                        std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j) + dj;
                        if (ii < 0 || jj < 0 || ii >= static_cast<std::ptrdiff_t>(h) ||
                            jj >= static_cast<std::ptrdiff_t>(w))
                            continue;
                        const double* src = in + ((b * h + ii) * w + jj) * c;
                        const double* kk = ker + ((di + 1) * 3 + (dj + 1)) * c;
                        for (std::size_t cc = 0; cc < c; ++cc) o[cc] += src[cc] * kk[cc];
                    }
                }
            }
        }
    }, bs * h * w * c * 9);
}

}  // namespace

Tensor depthwise_conv2d(const Tensor& a, const Tensor& kernels) {
    bool batched = a.rank() == 4;
    check_arg(batched || a.rank() == 3, "dwconv: input must be [H,W,C] or [B,H,W,C]");
    check_arg(kernels.rank() == 3 && kernels.extent(0) == 3 && kernels.extent(1) == 3,
              "dwconv: kernels must be [3,3,C]");
    std::size_t bs = batched ? a.extent(0) : 1;
    std::size_t h = a.extent(batched ? 1 : 0);
    std::size_t w = a.extent(batched ? 2 : 1);
    std::size_t c = a.shape().back();
    check_arg(kernels.extent(2) == c, "dwconv: channel count mismatch");
    Tensor out = Tensor::zeros(a.shape());
    dwconv_forward(a.data(), kernels.data(), out.data_mut(), bs, h, w, c);
    ensure_finite(out, "dwconv");
    if (recording(a, kernels)) {
        out.set_requires_grad(true);
        Tensor ac = a, kc = kernels, oc = out;
        Tape::current()->record([ac, kc, oc, bs, h, w, c]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            const double* in = ac.data();
            const double* ker = kc.data();
            if (ac.requires_grad()) {
                double* ga = ac.grad_mut().data();
                // d in[b,ii,jj,c] += sum over taps that read it
                parallel_for(bs * h, [&](std::size_t lo, std::size_t hi) {
                    for (std::size_t bi = lo; bi < hi; ++bi) {
                        std::size_t b = bi / h, i = bi % h;
                        for (std::size_t j = 0; j < w; ++j) {
                            double* gi = ga + ((b * h + i) * w + j) * c;
                            for (int di = -1; di <= 1; ++di) {
                                for (int dj = -1; dj <= 1; ++dj) {
                                    std::ptrdiff_t oi = static_cast<std::ptrdiff_t>(i) - di;
                                    std::ptrdiff_t oj = static_cast<std::ptrdiff_t>(j) - dj;
                                    if (oi < 0 || oj < 0 ||
                                        oi >= static_cast<std::ptrdiff_t>(h) ||
                                        oj >= static_cast<std::ptrdiff_t>(w))
                                        continue;
                                    const double* gr = g + ((b * h + oi) * w + oj) * c;
                                    const double* kk = ker + ((di + 1) * 3 + (dj + 1)) * c;
                                    for (std::size_t cc = 0; cc < c; ++cc)
                                        gi[cc] += gr[cc] * kk[cc];
                                }
                            }
                        }
                    }
                }, bs * h * w * c * 9);
            }
            if (kc.requires_grad()) {
                double* gk = kc.grad_mut().data();
                for (int di = -1; di <= 1; ++di) {
                    for (int dj = -1; dj <= 1; ++dj) {
                        double* kk = gk + ((di + 1) * 3 + (dj + 1)) * c;
                        for (std::size_t b = 0; b < bs; ++b) {
                            for (std::size_t i = 0; i < h; ++i) {
                                std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i) + di;
                                if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
                                for (std::size_t j = 0; j < w; ++j) {
                                    std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j) + dj;
                                    if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(w)) continue;
                                    const double* gr = g + ((b * h + i) * w + j) * c;
                                    const double* src = in + ((b * h + ii) * w + jj) * c;
                                    for (std::size_t cc = 0; cc < c; ++cc)
                                        kk[cc] += gr[cc] * src[cc];
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor log_softmax_lastaxis(const Tensor& a) {
    check_arg(a.rank() >= 1 && a.shape().back() > 0, "log_softmax: empty class axis");
    std::size_t cls = a.shape().back();
    std::size_t rows = a.size() / cls;
    Tensor out = Tensor::uninitialized(a.shape());
    {
        const double* pa = a.data();
        double* o = out.data_mut();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* row = pa + r * cls;
            double m = row[0];
            for (std::size_t c = 1; c < cls; ++c) m = std::max(m, row[c]);
            double s = 0.0;
            for (std::size_t c = 0; c < cls; ++c) s += std::exp(row[c] - m);
            double lse = m + std::log(s);
            for (std::size_t c = 0; c < cls; ++c) o[r * cls + c] = row[c] - lse;
        }
    }
    ensure_finite(out, "log_softmax");
    if (recording(a)) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        Tape::current()->record([ac, oc, rows, cls]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            const double* po = oc.data();
            double* ga = ac.grad_mut().data();
            for (std::size_t r = 0; r < rows; ++r) {
                double gsum = 0.0;
                for (std::size_t c = 0; c < cls; ++c) gsum += g[r * cls + c];
                for (std::size_t c = 0; c < cls; ++c)
                    ga[r * cls + c] += g[r * cls + c] - std::exp(po[r * cls + c]) * gsum;
            }
        });
    }
    return out;
}

Tensor softmax_lastaxis(const Tensor& a) { return exp(log_softmax_lastaxis(a)); }

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
    bool batched = x.rank() == 3;
    check_arg(batched || x.rank() == 2, "gather_rows: input must be [R,C] or [B,R,C]");
    std::size_t bs = batched ? x.extent(0) : 1;
    std::size_t rows = x.extent(batched ? 1 : 0);
    std::size_t c = x.shape().back();
    check_arg(perm.size() == rows, "gather_rows: permutation length mismatch");
    bool perm_ok = true;
    for (std::size_t p : perm) perm_ok &= p < rows;
    check_arg(perm_ok, "gather_rows: index out of range");
    Tensor out = Tensor::uninitialized(x.shape());
    {
        const double* px = x.data();
        double* o = out.data_mut();
        for (std::size_t b = 0; b < bs; ++b)
            for (std::size_t r = 0; r < rows; ++r)
                std::copy(px + (b * rows + perm[r]) * c, px + (b * rows + perm[r] + 1) * c,
                          o + (b * rows + r) * c);
    }
    if (recording(x)) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        std::vector<std::size_t> pm = perm;
        Tape::current()->record([xc, oc, pm, bs, rows, c]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            double* gx = xc.grad_mut().data();
            for (std::size_t b = 0; b < bs; ++b)
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t k = 0; k < c; ++k)
                        gx[(b * rows + pm[r]) * c + k] += g[(b * rows + r) * c + k];
        });
    }
    return out;
}

Tensor scatter_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
    bool batched = x.rank() == 3;
    check_arg(batched || x.rank() == 2, "scatter_rows: input must be [R,C] or [B,R,C]");
    std::size_t bs = batched ? x.extent(0) : 1;
    std::size_t rows = x.extent(batched ? 1 : 0);
    std::size_t c = x.shape().back();
    check_arg(perm.size() == rows, "scatter_rows: permutation length mismatch");
    bool perm_ok = true;
    for (std::size_t p : perm) perm_ok &= p < rows;
    check_arg(perm_ok, "scatter_rows: index out of range");
    Tensor out = Tensor::uninitialized(x.shape());
    {
        const double* px = x.data();
        double* o = out.data_mut();
        for (std::size_t b = 0; b < bs; ++b)
            for (std::size_t r = 0; r < rows; ++r)
                std::copy(px + (b * rows + r) * c, px + (b * rows + r + 1) * c,
                          o + (b * rows + perm[r]) * c);
    }
    if (recording(x)) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        std::vector<std::size_t> pm = perm;
        Tape::current()->record([xc, oc, pm, bs, rows, c]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            double* gx = xc.grad_mut().data();
            for (std::size_t b = 0; b < bs; ++b)
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t k = 0; k < c; ++k)
                        gx[(b * rows + r) * c + k] += g[(b * rows + pm[r]) * c + k];
        });
    }
    return out;
}

Tensor upsample_nearest2(const Tensor& x) {
    check_arg(x.rank() == 4, "upsample: input must be [B,H,W,C]");
    std::size_t bs = x.extent(0), h = x.extent(1), w = x.extent(2), c = x.extent(3);
    Tensor out = Tensor::uninitialized({bs, 2 * h, 2 * w, c});
    {
        const double* px = x.data();
        double* o = out.data_mut();
        for (std::size_t b = 0; b < bs; ++b)
            for (std::size_t i = 0; i < 2 * h; ++i)
                for (std::size_t j = 0; j < 2 * w; ++j)
                    std::copy(px + ((b * h + i / 2) * w + j / 2) * c,
                              px + ((b * h + i / 2) * w + j / 2 + 1) * c,
                              o + ((b * 2 * h + i) * 2 * w + j) * c);
    }
    if (recording(x)) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        Tape::current()->record([xc, oc, bs, h, w, c]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            double* gx = xc.grad_mut().data();
            for (std::size_t b = 0; b < bs; ++b)
                for (std::size_t i = 0; i < 2 * h; ++i)
                    for (std::size_t j = 0; j < 2 * w; ++j)
                        for (std::size_t k = 0; k < c; ++k)
                            gx[((b * h + i / 2) * w + j / 2) * c + k] +=
                                g[((b * 2 * h + i) * 2 * w + j) * c + k];
        });
    }
    return out;
}

Tensor space_to_depth2(const Tensor& x) {
    check_arg(x.rank() == 4, "space_to_depth: input must be [B,H,W,C]");
    std::size_t bs = x.extent(0), h = x.extent(1), w = x.extent(2), c = x.extent(3);
    check_arg(h % 2 == 0 && w % 2 == 0,
              "space_to_depth: spatial extents must be even, got " + shape_str(x.shape()));
    std::size_t oh = h / 2, ow = w / 2;
    Tensor out = Tensor::uninitialized({bs, oh, ow, 4 * c});
    {
        const double* px = x.data();
        double* o = out.data_mut();
        for (std::size_t b = 0; b < bs; ++b)
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j)
                    for (std::size_t di = 0; di < 2; ++di)
                        for (std::size_t dj = 0; dj < 2; ++dj)
                            std::copy(
                                px + ((b * h + 2 * i + di) * w + 2 * j + dj) * c,
                                px + ((b * h + 2 * i + di) * w + 2 * j + dj + 1) * c,
                                o + ((b * oh + i) * ow + j) * 4 * c + (2 * di + dj) * c);
    }
    if (recording(x)) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        Tape::current()->record([xc, oc, bs, h, w, c, oh, ow]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            double* gx = xc.grad_mut().data();
            for (std::size_t b = 0; b < bs; ++b)
                for (std::size_t i = 0; i < oh; ++i)
                    for (std::size_t j = 0; j < ow; ++j)
                        for (std::size_t di = 0; di < 2; ++di)
                            for (std::size_t dj = 0; dj < 2; ++dj)
                                for (std::size_t k = 0; k < c; ++k)
                                    gx[((b * h + 2 * i + di) * w + 2 * j + dj) * c + k] +=
                                        g[((b * oh + i) * ow + j) * 4 * c + (2 * di + dj) * c +
                                          k];
        });
    }
    return out;
}

Tensor depth_to_space2(const Tensor& x) {
    check_arg(x.rank() == 4, "depth_to_space: input must be [B,H,W,C]");
    std::size_t bs = x.extent(0), h = x.extent(1), w = x.extent(2), c4 = x.extent(3);
    check_arg(c4 % 4 == 0, "depth_to_space: channel extent must be divisible by 4");
    std::size_t c = c4 / 4;
    Tensor out = Tensor::uninitialized({bs, 2 * h, 2 * w, c});
    {
        const double* px = x.data();
        double* o = out.data_mut();
        for (std::size_t b = 0; b < bs; ++b)
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j)
                    for (std::size_t di = 0; di < 2; ++di)
                        for (std::size_t dj = 0; dj < 2; ++dj)
                            std::copy(
                                px + ((b * h + i) * w + j) * c4 + (2 * di + dj) * c,
                                px + ((b * h + i) * w + j) * c4 + (2 * di + dj + 1) * c,
                                o + ((b * 2 * h + 2 * i + di) * 2 * w + 2 * j + dj) * c);
    }
    if (recording(x)) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        Tape::current()->record([xc, oc, bs, h, w, c, c4]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            double* gx = xc.grad_mut().data();
            for (std::size_t b = 0; b < bs; ++b)
                for (std::size_t i = 0; i < h; ++i)
                    for (std::size_t j = 0; j < w; ++j)
                        for (std::size_t di = 0; di < 2; ++di)
                            for (std::size_t dj = 0; dj < 2; ++dj)
                                for (std::size_t k = 0; k < c; ++k)
                                    gx[((b * h + i) * w + j) * c4 + (2 * di + dj) * c + k] +=
                                        g[((b * 2 * h + 2 * i + di) * 2 * w + 2 * j + dj) * c +
                                          k];
        });
    }
    return out;
}

}  // namespace dcscan
