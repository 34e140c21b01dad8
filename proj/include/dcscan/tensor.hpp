#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dcscan/common.hpp"

namespace dcscan {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Allocator that default-initializes doubles, so buffers that are fully
// overwritten skip the zero fill.
template <class T>
struct UninitAlloc : std::allocator<T> {
    template <class U>
    struct rebind {
        using other = UninitAlloc<U>;
    };
    template <class U>
    void construct(U* p) noexcept {
        ::new (static_cast<void*>(p)) U;
    }
    template <class U, class... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
};

using Buffer = std::vector<double, UninitAlloc<double>>;

// Dense row-major f64 tensor. The handle is a shared pointer to the storage;
// copies are shallow. Values are immutable while a tape records over them
// (the optimizer mutates parameters between tapes via data_mut()).
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor uninitialized(Shape shape);   // contents unspecified
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);
    static Tensor from(Shape shape, Buffer values);
    static Tensor from(Shape shape, std::initializer_list<double> values);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const;
    std::size_t extent(std::size_t axis) const;

    const double* data() const;
    double* data_mut();
    const Buffer& values() const;

    double item() const;   // requires size() == 1
    double at(std::size_t flat) const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool v);

    // Gradient accumulator; allocated lazily on first accumulation.
    bool has_grad() const;
    const Buffer& grad() const;
    Buffer& grad_mut();                    // allocates zeros if absent
    void zero_grad();

    // Value copy with requires_grad = false.
    Tensor detach() const;

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

private:
    struct Impl {
        Shape shape;
        Buffer data;
        Buffer grad;   // empty until touched
        bool requires_grad = false;
    };
    std::shared_ptr<Impl> impl_;
};

// Records one backward closure per forward operation. Closures run in
// reverse recording order, which reproduces the chain rule exactly.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(std::function<void()> backward_fn);
    std::size_t num_nodes() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and replays the tape once. A second call
    // without re-recording is rejected.
    void backward(const Tensor& loss);
    bool consumed() const { return consumed_; }

    static Tape* current();

private:
    friend class TapeScope;
    std::vector<std::function<void()>> nodes_;
    bool consumed_ = false;
};

// RAII scope making a tape the recording target for the current thread.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

// Integer grid (class-index maps, argmax results). Not differentiable.
struct IntGrid {
    Shape shape;
    std::vector<int> v;

    std::size_t size() const { return v.size(); }
    static IntGrid zeros(Shape s) {
        IntGrid g;
        g.v.assign(shape_numel(s), 0);
        g.shape = std::move(s);
        return g;
    }
};

}  // namespace dcscan
