#include "dcscan/gradcheck.hpp"

#include <cmath>

namespace dcscan {

double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor> inputs, double h) {
    check_arg(h > 0.0, "grad_check: step must be positive");
    for (auto& t : inputs) t.set_requires_grad(true);

    Tape tape;
    {
        TapeScope scope(tape);
        Tensor loss = f(inputs);
        check_arg(loss.size() == 1, "grad_check: f must return a scalar");
        check_run(std::isfinite(loss.item()), "grad_check: non-finite objective");
        tape.backward(loss);
    }

    // Perturbed evaluations run tape-free.
    auto eval = [&](const std::vector<Tensor>& xs) {
        Tensor v = f(xs);
        check_run(std::isfinite(v.item()), "grad_check: non-finite objective");
        return v.item();
    };

    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Buffer* g = inputs[k].has_grad() ? &inputs[k].grad() : nullptr;
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            std::vector<Tensor> probe;
            probe.reserve(inputs.size());
            for (std::size_t j = 0; j < inputs.size(); ++j) probe.push_back(inputs[j].detach());
            double x0 = inputs[k].at(i);
            probe[k].data_mut()[i] = x0 + h;
            double fp = eval(probe);
            probe[k].data_mut()[i] = x0 - h;
            double fm = eval(probe);
            double numeric = (fp - fm) / (2.0 * h);
            double analytic = g ? (*g)[i] : 0.0;
            double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
    }
    return worst;
}

double grad_check_params(const std::function<Tensor()>& f, std::vector<Tensor> params,
                         double h, std::size_t sample_every, bool richardson) {
    check_arg(h > 0.0 && sample_every >= 1, "grad_check: bad step or stride");
    for (auto& t : params) {
        t.zero_grad();
        t.set_requires_grad(true);
    }
    Tape tape;
    {
        TapeScope scope(tape);
        Tensor loss = f();
        check_arg(loss.size() == 1, "grad_check: f must return a scalar");
        check_run(std::isfinite(loss.item()), "grad_check: non-finite objective");
        tape.backward(loss);
    }
    std::vector<Buffer> grads;
    grads.reserve(params.size());
    for (auto& t : params) {
        grads.push_back(t.has_grad() ? t.grad() : Buffer(t.size(), 0.0));
        t.zero_grad();
        t.set_requires_grad(false);
    }

    auto eval = [&] {
        Tensor v = f();
        check_run(std::isfinite(v.item()), "grad_check: non-finite objective");
        return v.item();
    };
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        for (std::size_t i = 0; i < params[k].size(); i += sample_every) {
            double* slot = params[k].data_mut() + i;
            double x0 = *slot;
            auto central = [&](double step) {
                *slot = x0 + step;
                double fp = eval();
                *slot = x0 - step;
                double fm = eval();
                *slot = x0;
                return (fp - fm) / (2.0 * step);
            };
            double numeric = central(h);
            if (richardson) numeric = (4.0 * central(h / 2.0) - numeric) / 3.0;
            double analytic = grads[k][i];
            double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
    }
    for (auto& t : params) t.set_requires_grad(true);
    return worst;
}

}  // namespace dcscan
