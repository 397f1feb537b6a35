#include "elcd/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace elcd::ad {

namespace {

double relative_error(double ad, double fd) { return std::abs(ad - fd) / std::max(1.0, std::abs(fd)); }

/// Derivative of f at 0 from samples f(k * step).
double central(const std::function<double(double)>& f, double step, Stencil stencil) {
    if (stencil == Stencil::ThreePoint) return (f(step) - f(-step)) / (2.0 * step);
    return (8.0 * (f(step) - f(-step)) - (f(2.0 * step) - f(-2.0 * step))) / (12.0 * step);
}

}  // namespace

double finite_diff_check(const std::function<Var()>& loss, const ParameterRefs& params, double step,
                         Stencil stencil) {
    const GradientMap grads = backward(loss());
    double worst = 0.0;
    for (Parameter* p : params) {
        if (!p->trainable()) continue;
        const Tensor analytic = grads.contains(p->id()) ? grads.at(p->id()) : Tensor(p->value().shape());
        auto values = p->mutable_values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            double fd = 0.0;
            {
                NoGradGuard guard;
                fd = central([&](double dx) {
                    values[i] = saved + dx;
                    return loss().value().item();
                }, step, stencil);
            }
            values[i] = saved;
            worst = std::max(worst, relative_error(analytic[i], fd));
        }
    }
    return worst;
}

double finite_diff_check_input(const std::function<Var(const Var&)>& loss, const Tensor& input, double step,
                               Stencil stencil) {
    const Var x = Var::leaf(input);
    const Var l = loss(x);
    const std::vector<Var> wrt{x};
    const Tensor analytic = gradients(l, wrt).front();
    double worst = 0.0;
    Tensor probe = input;
    NoGradGuard guard;
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double fd = central([&](double dx) {
            probe[i] = input[i] + dx;
            return loss(Var::constant(probe)).value().item();
        }, step, stencil);
        probe[i] = input[i];
        worst = std::max(worst, relative_error(analytic[i], fd));
    }
    return worst;
}

}  // namespace elcd::ad
