#include "dcscan/ops.hpp"

#include <algorithm>
#include <cmath>

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

// Broadcast plan: per-output-axis element strides for both inputs
// (stride 0 on broadcast axes).
struct Bcast {
    Shape out;
    std::vector<std::size_t> sa, sb;
};

Bcast broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
    std::size_t r = std::max(a.size(), b.size());
    Bcast p;
    p.out.resize(r);
    p.sa.assign(r, 0);
    p.sb.assign(r, 0);
    // native row-major strides, aligned to the right
    std::vector<std::size_t> stra(a.size()), strb(b.size());
    for (std::size_t i = a.size(); i-- > 0;)
        stra[i] = (i + 1 == a.size()) ? 1 : stra[i + 1] * a[i + 1];
    for (std::size_t i = b.size(); i-- > 0;)
        strb[i] = (i + 1 == b.size()) ? 1 : strb[i + 1] * b[i + 1];
    for (std::size_t i = 0; i < r; ++i) {
        std::size_t ax = r - 1 - i;
        std::size_t ea = i < a.size() ? a[a.size() - 1 - i] : 1;
        std::size_t eb = i < b.size() ? b[b.size() - 1 - i] : 1;
        check_arg(ea == eb || ea == 1 || eb == 1,
                  std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                      " are not broadcast-compatible");
        p.out[ax] = std::max(ea, eb);
        if (i < a.size() && ea != 1) p.sa[ax] = stra[a.size() - 1 - i];
        if (i < b.size() && eb != 1) p.sb[ax] = strb[b.size() - 1 - i];
    }
    return p;
}

// Iterates the broadcast output space; fn(out_flat, a_flat, b_flat).
// Fast paths cover the common layouts (identical shapes, scalar operand,
// trailing-suffix operand); the odometer handles the rest.
template <class Fn>
void bcast_iterate(const Bcast& p, std::size_t na, std::size_t nb, Fn&& fn) {
    std::size_t n = shape_numel(p.out);
    std::size_t r = p.out.size();
    if (r == 0) {
        if (n) fn(0, 0, 0);
        return;
    }
    if (na == n && nb == n) {
        for (std::size_t i = 0; i < n; ++i) fn(i, i, i);
        return;
    }
    if (na == n && nb == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i, i, 0);
        return;
    }
    if (nb == n && na == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i, 0, i);
        return;
    }
    if (na == n && nb != 0 && n % nb == 0) {
        // check b is a contiguous suffix: strides match the trailing layout
        std::size_t s = 1;
        bool suffix = true;
        for (std::size_t ax = r; ax-- > 0;) {
            if (s < nb) {
                suffix &= p.sb[ax] == s;
                s *= p.out[ax];
            } else {
                suffix &= p.sb[ax] == 0;
            }
        }
        if (suffix && s >= nb) {
            for (std::size_t i = 0; i < n; ++i) fn(i, i, i % nb);
            return;
        }
    }
    std::vector<std::size_t> idx(r, 0);
    std::size_t oa = 0, ob = 0;
    for (std::size_t i = 0; i < n; ++i) {
        fn(i, oa, ob);
        for (std::size_t ax = r; ax-- > 0;) {
            ++idx[ax];
            oa += p.sa[ax];
            ob += p.sb[ax];
            if (idx[ax] < p.out[ax]) break;
            oa -= p.sa[ax] * p.out[ax];
            ob -= p.sb[ax] * p.out[ax];
            idx[ax] = 0;
        }
    }
}

// Binary elementwise op: F computes the value, DA/DB the local partials
// as functions of (a, b, out).
template <class F, class DA, class DB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, F f, DA da, DB db) {
    Bcast p = broadcast_shapes(a.shape(), b.shape(), name);
    std::size_t na = a.size(), nb = b.size();
    Tensor out = Tensor::uninitialized(p.out);
    {
        double* o = out.data_mut();
        const double* pa = a.data();
        const double* pb = b.data();
        bcast_iterate(p, na, nb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
            o[i] = f(pa[ia], pb[ib]);
        });
    }
    ensure_finite(out, name);
    if (recording(a, b)) {
        out.set_requires_grad(true);
        Tensor ac = a, bc = b, oc = out;
        Tape::current()->record([ac, bc, oc, p, na, nb, da, db]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            const double* pa = ac.data();
            const double* pb = bc.data();
            const double* po = oc.data();
            double* ga = ac.requires_grad() ? ac.grad_mut().data() : nullptr;
            double* gb = bc.requires_grad() ? bc.grad_mut().data() : nullptr;
            bcast_iterate(p, na, nb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
                if (ga) ga[ia] += g[i] * da(pa[ia], pb[ib], po[i]);
                if (gb) gb[ib] += g[i] * db(pa[ia], pb[ib], po[i]);
            });
        });
    }
    return out;
}

// Unary elementwise op; D gives the local derivative from (x, out).
template <class F, class D>
Tensor unary_op(const Tensor& a, const char* name, F f, D d) {
    Tensor out = Tensor::uninitialized(a.shape());
    {
        double* o = out.data_mut();
        const double* pa = a.data();
        for (std::size_t i = 0, n = a.size(); i < n; ++i) o[i] = f(pa[i]);
    }
    ensure_finite(out, name);
    if (recording(a)) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        Tape::current()->record([ac, oc, d]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            const double* pa = ac.data();
            const double* po = oc.data();
            double* ga = ac.grad_mut().data();
            for (std::size_t i = 0, n = ac.size(); i < n; ++i) ga[i] += g[i] * d(pa[i], po[i]);
        });
    }
    return out;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double, double y, double) { return 1.0 / y; },
        [](double, double y, double o) { return -o / y; });
}

Tensor pow(const Tensor& a, const Tensor& b) {
    if (b.requires_grad()) {
        const double* pa = a.data();
        bool ok = true;
        for (std::size_t i = 0, n = a.size(); i < n; ++i) ok &= pa[i] > 0.0;
        check_arg(ok, "pow: base must be positive for a differentiable exponent");
    }
    return binary_op(
        a, b, "pow", [](double x, double y) { return std::pow(x, y); },
        [](double x, double y, double) { return y * std::pow(x, y - 1.0); },
        [](double x, double, double o) { return o * std::log(x); });
}

Tensor add(const Tensor& a, double s) {
    return unary_op(
        a, "add", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}
Tensor sub(const Tensor& a, double s) { return add(a, -s); }
Tensor sub(double s, const Tensor& a) {
    return unary_op(
        a, "sub", [s](double x) { return s - x; }, [](double, double) { return -1.0; });
}
Tensor mul(const Tensor& a, double s) {
    return unary_op(
        a, "mul", [s](double x) { return x * s; }, [s](double, double) { return s; });
}
Tensor div(const Tensor& a, double s) { return mul(a, 1.0 / s); }
Tensor div(double s, const Tensor& a) {
    return unary_op(
        a, "div", [s](double x) { return s / x; },
        [](double x, double o) { return -o / x; });
}
Tensor pow(const Tensor& a, double s) {
    return unary_op(
        a, "pow", [s](double x) { return std::pow(x, s); },
        [s](double x, double) { return s * std::pow(x, s - 1.0); });
}

Tensor neg(const Tensor& a) {
    return unary_op(
        a, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& a) {
    return unary_op(
        a, "exp", [](double x) { return std::exp(x); }, [](double, double o) { return o; });
}

Tensor log(const Tensor& a) {
    const double* pa = a.data();
    bool ok = true;
    for (std::size_t i = 0, n = a.size(); i < n; ++i) ok &= pa[i] > 0.0;
    check_arg(ok, "log: non-positive input");
    return unary_op(
        a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        a, "sigmoid", [](double x) { return stable_sigmoid(x); },
        [](double, double o) { return o * (1.0 - o); });
}

Tensor softplus(const Tensor& a) {
    return unary_op(
        a, "softplus", [](double x) { return stable_softplus(x); },
        [](double x, double) { return stable_sigmoid(x); });
}

Tensor silu(const Tensor& a) {
    return unary_op(
        a, "silu", [](double x) { return x * stable_sigmoid(x); },
        [](double x, double) {
            double s = stable_sigmoid(x);
            return s * (1.0 + x * (1.0 - s));
        });
}

// ---------------------------------------------------------------------------
// Reductions

namespace {

// Maps each input flat index to the output flat index of a reduction.
struct ReducePlan {
    Shape out_shape;        // reduced shape (keepdim applied)
    Shape full_out_shape;   // with reduced axes kept as 1 (for iteration)
    std::vector<std::size_t> out_stride;   // per input axis
    std::size_t group = 1;                 // number of inputs per output
};

ReducePlan reduce_plan(const Shape& in, std::vector<std::size_t> axes, bool keepdim) {
    if (axes.empty()) {
        axes.resize(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) axes[i] = i;
    }
    std::vector<bool> reduced(in.size(), false);
    for (std::size_t ax : axes) {
        check_arg(ax < in.size(), "reduce: axis out of range");
        check_arg(in[ax] > 0, "reduce: empty reduction axis");
        reduced[ax] = true;
    }
    ReducePlan p;
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (reduced[i]) {
            p.group *= in[i];
            if (keepdim) p.out_shape.push_back(1);
        } else {
            p.out_shape.push_back(in[i]);
        }
        p.full_out_shape.push_back(reduced[i] ? 1 : in[i]);
    }
    // strides of the kept-as-1 output, zeroed on reduced axes
    p.out_stride.assign(in.size(), 0);
    std::size_t s = 1;
    for (std::size_t i = in.size(); i-- > 0;) {
        if (!reduced[i]) {
            p.out_stride[i] = s;
            s *= in[i];
        }
    }
    return p;
}

template <class Fn>
void reduce_iterate(const Shape& in, const ReducePlan& p, Fn&& fn) {
    std::size_t n = shape_numel(in);
    std::size_t r = in.size();
    if (r == 0) {
        if (n) fn(0, 0);
        return;
    }
    std::vector<std::size_t> idx(r, 0);
    std::size_t o = 0;
    for (std::size_t i = 0; i < n; ++i) {
        fn(i, o);
        for (std::size_t ax = r; ax-- > 0;) {
            ++idx[ax];
            o += p.out_stride[ax];
            if (idx[ax] < in[ax]) break;
            o -= p.out_stride[ax] * in[ax];
            idx[ax] = 0;
        }
    }
}

Tensor reduce_impl(const Tensor& a, const std::vector<std::size_t>& axes, bool keepdim,
                   bool is_mean) {
    check_arg(a.size() > 0, "reduce: empty tensor");
    ReducePlan p = reduce_plan(a.shape(), axes, keepdim);
    double scale = is_mean ? 1.0 / static_cast<double>(p.group) : 1.0;
    Tensor out = Tensor::zeros(p.out_shape);
    {
        double* o = out.data_mut();
        const double* pa = a.data();
        reduce_iterate(a.shape(), p, [&](std::size_t i, std::size_t oi) { o[oi] += pa[i]; });
        if (is_mean)
            for (std::size_t i = 0, n = out.size(); i < n; ++i) o[i] *= scale;
    }
    ensure_finite(out, is_mean ? "mean" : "sum");
    if (recording(a)) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        Shape in_shape = a.shape();
        Tape::current()->record([ac, oc, p, in_shape, scale]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            double* ga = ac.grad_mut().data();
            reduce_iterate(in_shape, p,
                           [&](std::size_t i, std::size_t oi) { ga[i] += g[oi] * scale; });
        });
    }
    return out;
}

}  // namespace

Tensor sum(const Tensor& a, const std::vector<std::size_t>& axes, bool keepdim) {
    return reduce_impl(a, axes, keepdim, false);
}

Tensor mean(const Tensor& a, const std::vector<std::size_t>& axes, bool keepdim) {
    return reduce_impl(a, axes, keepdim, true);
}

MaxResult max_lastaxis(const Tensor& a) {
    check_arg(a.rank() >= 1, "max: rank-0 input");
    std::size_t cls = a.shape().back();
    check_arg(cls > 0, "max: empty reduction axis");
    std::size_t rows = a.size() / cls;
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    MaxResult res;
    res.values = Tensor::uninitialized(out_shape);
    res.argmax = IntGrid::zeros(out_shape);
    const double* pa = a.data();
    double* v = res.values.data_mut();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = pa + r * cls;
        std::size_t best = 0;
        for (std::size_t c = 1; c < cls; ++c)
            if (row[c] > row[best]) best = c;
        v[r] = row[best];
        res.argmax.v[r] = static_cast<int>(best);
    }
    if (recording(a)) {
        res.values.set_requires_grad(true);
        Tensor ac = a, oc = res.values;
        std::vector<int> arg = res.argmax.v;
        Tape::current()->record([ac, oc, arg, cls]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            double* ga = ac.grad_mut().data();
            for (std::size_t r = 0; r < arg.size(); ++r)
                ga[r * cls + static_cast<std::size_t>(arg[r])] += g[r];
        });
    }
    return res;
}

// ---------------------------------------------------------------------------
// Shape plumbing

Tensor reshape(const Tensor& a, Shape shape) {
    check_arg(shape_numel(shape) == a.size(),
              "reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape) +
                  " changes element count");
    Tensor out = Tensor::from(std::move(shape), a.values());
    if (recording(a)) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        Tape::current()->record([ac, oc]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            double* ga = ac.grad_mut().data();
            for (std::size_t i = 0, n = ac.size(); i < n; ++i) ga[i] += g[i];
        });
    }
    return out;
}

Tensor concat_lastaxis(const Tensor& a, const Tensor& b) {
    check_arg(a.rank() == b.rank() && a.rank() >= 1, "concat: rank mismatch");
    for (std::size_t i = 0; i + 1 < a.rank(); ++i)
        check_arg(a.extent(i) == b.extent(i), "concat: leading extents differ");
    std::size_t ca = a.shape().back(), cb = b.shape().back();
    Shape out_shape = a.shape();
    out_shape.back() = ca + cb;
    Tensor out = Tensor::uninitialized(out_shape);
    std::size_t rows = a.size() / ca;
    double* o = out.data_mut();
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy(pa + r * ca, pa + (r + 1) * ca, o + r * (ca + cb));
        std::copy(pb + r * cb, pb + (r + 1) * cb, o + r * (ca + cb) + ca);
    }
    if (recording(a, b)) {
        out.set_requires_grad(true);
        Tensor ac = a, bc = b, oc = out;
        Tape::current()->record([ac, bc, oc, rows, ca, cb]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            double* ga = ac.requires_grad() ? ac.grad_mut().data() : nullptr;
            double* gb = bc.requires_grad() ? bc.grad_mut().data() : nullptr;
            for (std::size_t r = 0; r < rows; ++r) {
                if (ga)
                    for (std::size_t c = 0; c < ca; ++c) ga[r * ca + c] += g[r * (ca + cb) + c];
                if (gb)
                    for (std::size_t c = 0; c < cb; ++c)
                        gb[r * cb + c] += g[r * (ca + cb) + ca + c];
            }
        });
    }
    return out;
}

Tensor slice_axis0(const Tensor& a, std::size_t start, std::size_t count) {
    check_arg(a.rank() >= 1, "slice: rank-0 input");
    check_arg(start + count <= a.extent(0), "slice: range out of bounds");
    std::size_t row = a.size() / a.extent(0);
    Shape out_shape = a.shape();
    out_shape[0] = count;
    Tensor out = Tensor::uninitialized(out_shape);
    std::copy(a.data() + start * row, a.data() + (start + count) * row, out.data_mut());
    if (recording(a)) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        Tape::current()->record([ac, oc, start, row, count]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            double* ga = ac.grad_mut().data();
            for (std::size_t i = 0, n = count * row; i < n; ++i) ga[start * row + i] += g[i];
        });
    }
    return out;
}

Tensor channel_at(const Tensor& a, std::size_t c) {
    check_arg(a.rank() >= 1, "channel_at: rank-0 input");
    std::size_t cls = a.shape().back();
    check_arg(c < cls, "channel_at: channel out of range");
    std::size_t rows = a.size() / cls;
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    Tensor out = Tensor::uninitialized(out_shape);
    double* o = out.data_mut();
    const double* pa = a.data();
    for (std::size_t r = 0; r < rows; ++r) o[r] = pa[r * cls + c];
    if (recording(a)) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        Tape::current()->record([ac, oc, rows, cls, c]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            double* ga = ac.grad_mut().data();
            for (std::size_t r = 0; r < rows; ++r) ga[r * cls + c] += g[r];
        });
    }
    return out;
}

Tensor gather_lastaxis(const Tensor& a, const IntGrid& idx) {
    check_arg(a.rank() >= 1, "gather: rank-0 input");
    std::size_t cls = a.shape().back();
    std::size_t rows = a.size() / cls;
    check_arg(idx.size() == rows, "gather: index count does not match rows");
    bool idx_ok = true;
    for (int t : idx.v) idx_ok &= t >= 0 && static_cast<std::size_t>(t) < cls;
    check_arg(idx_ok, "gather: class index out of range");
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    Tensor out = Tensor::uninitialized(out_shape);
    double* o = out.data_mut();
    const double* pa = a.data();
    for (std::size_t r = 0; r < rows; ++r) o[r] = pa[r * cls + static_cast<std::size_t>(idx.v[r])];
    if (recording(a)) {
        out.set_requires_grad(true);
        Tensor ac = a, oc = out;
        std::vector<int> iv = idx.v;
        Tape::current()->record([ac, oc, iv, cls]() mutable {
            if (!oc.has_grad()) return;
            const double* g = oc.grad().data();
            double* ga = ac.grad_mut().data();
            for (std::size_t r = 0; r < iv.size(); ++r)
                ga[r * cls + static_cast<std::size_t>(iv[r])] += g[r];
        });
    }
    return out;
}

}  // namespace dcscan
