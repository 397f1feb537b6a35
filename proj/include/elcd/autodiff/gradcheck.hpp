#pragma once

#include <functional>

#include "elcd/autodiff/var.hpp"

namespace elcd::ad {

/// Central difference order: error O(step^2) or O(step^4).
enum class Stencil { ThreePoint, FivePoint };

/// Max over all entries of the given parameters of |ad - fd| / max(1, |fd|),
/// with fd the central difference of `loss` at `step`. `loss` must be a
/// deterministic function of the parameter values returning a scalar.
double finite_diff_check(const std::function<Var()>& loss, const ParameterRefs& params, double step = 1e-5,
                         Stencil stencil = Stencil::ThreePoint);

/// Same comparison for the gradient with respect to a free input tensor.
double finite_diff_check_input(const std::function<Var(const Var&)>& loss, const Tensor& input, double step = 1e-5,
                               Stencil stencil = Stencil::ThreePoint);

}  // namespace elcd::ad
