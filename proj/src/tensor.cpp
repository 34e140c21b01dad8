#include "dcscan/tensor.hpp"

#include <numeric>
#include <sstream>
#include <thread>

namespace dcscan {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::uninitialized(Shape shape) {
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->data.resize(shape_numel(shape));   // default-init, no fill
    t.impl_->shape = std::move(shape);
    return t;
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->data.assign(shape_numel(shape), value);
    t.impl_->shape = std::move(shape);
    return t;
}

Tensor Tensor::scalar(double value) { return full(Shape{}, value); }

Tensor Tensor::from(Shape shape, std::initializer_list<double> values) {
    return from(std::move(shape), Buffer(values.begin(), values.end()));
}

Tensor Tensor::from(Shape shape, Buffer values) {
    check_arg(shape_numel(shape) == values.size(),
              "tensor: value count " + std::to_string(values.size()) + " does not fill shape " +
                  shape_str(shape));
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(values);
    return t;
}

const Shape& Tensor::shape() const {
    check_arg(defined(), "tensor: use of undefined tensor");
    return impl_->shape;
}

std::size_t Tensor::size() const { return impl_ ? impl_->data.size() : 0; }

std::size_t Tensor::extent(std::size_t axis) const {
    check_arg(axis < rank(), "tensor: axis out of range");
    return impl_->shape[axis];
}

const double* Tensor::data() const {
    check_arg(defined(), "tensor: use of undefined tensor");
    return impl_->data.data();
}

double* Tensor::data_mut() {
    check_arg(defined(), "tensor: use of undefined tensor");
    return impl_->data.data();
}

const Buffer& Tensor::values() const {
    check_arg(defined(), "tensor: use of undefined tensor");
    return impl_->data;
}

double Tensor::item() const {
    check_arg(size() == 1, "tensor: item() on non-scalar of shape " + shape_str(shape()));
    return impl_->data[0];
}

double Tensor::at(std::size_t flat) const {
    check_arg(flat < size(), "tensor: flat index out of range");
    return impl_->data[flat];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
    check_arg(defined(), "tensor: use of undefined tensor");
    impl_->requires_grad = v;
    return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

const Buffer& Tensor::grad() const {
    check_arg(has_grad(), "tensor: gradient was never accumulated");
    return impl_->grad;
}

Buffer& Tensor::grad_mut() {
    check_arg(defined(), "tensor: use of undefined tensor");
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (impl_) impl_->grad.clear();
}

Tensor Tensor::detach() const {
    check_arg(defined(), "tensor: use of undefined tensor");
    return Tensor::from(impl_->shape, impl_->data);
}

namespace {
thread_local Tape* g_current_tape = nullptr;
}

Tape* Tape::current() { return g_current_tape; }

void Tape::record(std::function<void()> backward_fn) {
    check_run(!consumed_, "tape: recording onto a consumed tape");
    nodes_.push_back(std::move(backward_fn));
}

void Tape::backward(const Tensor& loss) {
    check_run(!consumed_, "tape: backward through a consumed tape");
    check_arg(loss.size() == 1, "tape: backward target must be scalar");
    consumed_ = true;
    Tensor seed = loss;
    seed.grad_mut()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

TapeScope::TapeScope(Tape& tape) : prev_(g_current_tape) { g_current_tape = &tape; }

TapeScope::~TapeScope() { g_current_tape = prev_; }

namespace {
thread_local bool g_in_worker = false;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& chunk_fn,
                  std::size_t work) {
    int workers = max_threads();
    // a thread spawn+join costs tens of microseconds; only fan out when the
    // sequential work dwarfs that
    constexpr std::size_t kMinWork = 1u << 20;
    if (workers <= 1 || n < 2 || g_in_worker || work < kMinWork) {
        chunk_fn(0, n);
        return;
    }
    std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::size_t chunk = (n + nw - 1) / nw;
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (std::size_t w = 0; w < nw; ++w) {
        std::size_t lo = w * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&chunk_fn, lo, hi] {
            g_in_worker = true;
            chunk_fn(lo, hi);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace dcscan
