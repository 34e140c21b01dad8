#pragma once

#include <functional>

#include "dcscan/tensor.hpp"

namespace dcscan {

// Central-difference audit of the tape. Runs f once under a fresh tape,
// backpropagates, then compares every input partial against
// (f(x+h) - f(x-h)) / 2h. Returns the max relative error with denominator
// max(|analytic|, |numeric|, 1e-8). f must return a finite scalar.
double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor> inputs, double h = 1e-5);

// Same audit for parameters living inside a model: f() closes over the
// structures that hold `params`; central differences perturb the shared
// tensors in place and restore them. `sample_every` > 1 checks a strided
// subset of each tensor's elements. `richardson` combines steps h and h/2
// into the O(h^4) five-point estimate, which matters for sharply curved
// objectives.
double grad_check_params(const std::function<Tensor()>& f, std::vector<Tensor> params,
                         double h = 1e-5, std::size_t sample_every = 1,
                         bool richardson = false);

}  // namespace dcscan
