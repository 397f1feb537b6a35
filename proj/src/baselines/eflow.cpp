#include <cmath>

#include "elcd/baselines/baselines.hpp"
#include "elcd/errors.hpp"

namespace elcd::baselines {

using ad::Shape;
using ad::Tensor;
using ad::Var;

EflowModel::EflowModel(const model::ModelSpec& spec)
    : spec_((spec.validate(), spec)), diffeo_(spec.diffeo_config(derive_seed(spec.seed, 40)), "diffeo") {
    if (spec.kind != model::ModelKind::Eflow) throw ConfigError("EflowModel needs kind eflow");
}

Var EflowModel::predict(const Var& x) const {
    const std::size_t d = dim();
    if (x.shape().size() != 2 || x.dim(1) != d) throw ShapeError("eflow input " + ad::shape_string(x.shape()));
    const std::size_t rows = x.dim(0);
    const Var xs = ad::concat({x, Var::constant(equilibrium().reshaped(Shape{1, d}))}, 0);
    const bool identity = spec_.pattern == flows::StackPattern::Identity;
    flows::DiffeoStack::Linearization lin;
    if (identity) {
        lin.value = xs;
    } else {
        lin = diffeo_.linearize(xs);
    }
    const Var y = ad::slice(lin.value, 0, 0, rows);
    const Var target = ad::repeat_rows(ad::reshape(ad::slice(lin.value, 0, rows, rows + 1), Shape{d}), rows);
    const Var r = ad::sub(y, target);
    const double delta = spec_.eflow_clamp;
    const Var len = ad::sqrt(ad::clamp_min(ad::sum_axis(ad::square(r), 1), delta * delta));
    const Var g = ad::div(r, ad::expand_last(len, d));
    if (identity) return ad::neg(g);
    return ad::neg(ad::linear_solve(ad::slice(lin.jacobian, 0, 0, rows), g));
}

std::vector<double> EflowModel::potential(const Tensor& x) const {
    const std::size_t n = x.dim(0), d = dim();
    const Tensor y = diffeo_.forward(x);
    const Tensor ys = diffeo_.forward(equilibrium().reshaped(Shape{1, d}));
    std::vector<double> out(n);
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += (y[r * d + k] - ys[k]) * (y[r * d + k] - ys[k]);
        out[r] = std::sqrt(s);
    }
    return out;
}

void EflowModel::collect(ad::ParameterRefs& out) { diffeo_.collect(out); }

std::unique_ptr<model::DynamicsModel> EflowModel::clone() const { return std::make_unique<EflowModel>(*this); }

}  // namespace elcd::baselines
