#include <cmath>

#include "elcd/baselines/baselines.hpp"
#include "elcd/errors.hpp"

namespace elcd::baselines {

using ad::Shape;
using ad::Tensor;
using ad::Var;
using nn::Dual;

namespace {

// Continuously differentiable convex ramp: 0 below 0, u^2 / 2w on [0, w],
// u - w / 2 above.
Dual smooth_relu(const Dual& u, double w) {
    const Dual a = nn::dual::relu(nn::dual::scale(u, 1.0 / w));
    const Dual b = nn::dual::relu(nn::dual::add_scalar(nn::dual::scale(u, 1.0 / w), -1.0));
    return nn::dual::scale(nn::dual::sub(nn::dual::mul(a, a), nn::dual::mul(b, b)), 0.5 * w);
}

Tensor fan_in(Shape shape, std::size_t in, Rng& rng) {
    Tensor t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : t.values()) v = uniform(rng, -bound, bound);
    return t;
}

}  // namespace

Var sdd_projection(const Var& fhat, const Var& grad_v, const Var& v, double alpha) {
    const std::size_t rows = fhat.dim(0), d = fhat.dim(1);
    const Var dot = ad::sum_axis(ad::mul(grad_v, fhat), 1);
    const Var excess = ad::relu(ad::add(dot, ad::scale(v, alpha)));
    const Var sq = ad::sum_axis(ad::square(grad_v), 1);
    std::vector<std::uint8_t> live(rows);
    for (std::size_t r = 0; r < rows; ++r) live[r] = sq.value()[r] > 0.0;
    const Var safe = ad::select(live, sq, Var::constant(Tensor(Shape{rows}, 1.0)));
    const Var out = ad::sub(fhat, ad::mul(grad_v, ad::expand_last(ad::div(excess, safe), d)));
    std::vector<std::uint8_t> live_rows(rows * d);
    for (std::size_t i = 0; i < rows * d; ++i) live_rows[i] = live[i / d];
    return ad::select(live_rows, out, Var::constant(Tensor(Shape{rows, d})));
}

SddModel::SddModel(const model::ModelSpec& spec)
    : spec_((spec.validate(), spec)),
      fhat_([&] {
          Rng rng(derive_seed(spec.seed, 20));
          return nn::Mlp("sdd.fhat", spec.dim, {spec.hidden, spec.hidden}, spec.dim, rng);
      }()),
      icnn_in_([&] {
          Rng rng(derive_seed(spec.seed, 21));
          return nn::Dense("sdd.icnn.input", spec.dim, spec.icnn_hidden, rng);
      }()) {
    if (spec.kind != model::ModelKind::Sdd) throw ConfigError("SddModel needs kind sdd");
    Rng rng(derive_seed(spec.seed, 22));
    const std::size_t h = spec.icnn_hidden, d = spec.dim;
    // Two mixing layers: hidden -> hidden, hidden -> 1. Raw weights are
    // squared, so they start at |U(-b, b)| magnitudes.
    icnn_skip_.emplace_back("sdd.icnn.skip0", d, h, rng);
    icnn_mix_.emplace_back("sdd.icnn.mix0", fan_in(Shape{h, h}, h, rng));
    icnn_skip_.emplace_back("sdd.icnn.skip1", d, 1, rng);
    icnn_mix_.emplace_back("sdd.icnn.mix1", fan_in(Shape{1, h}, h, rng));
}

Dual SddModel::convex_net(const Dual& x) const {
    Dual z = nn::dual::softplus(icnn_in_(x));
    for (std::size_t i = 0; i < icnn_mix_.size(); ++i) {
        const Var w = ad::square(icnn_mix_[i].var());
        Dual pre = nn::dual::add(nn::dual::linear(z, w, Var()), icnn_skip_[i](x));
        z = i + 1 < icnn_mix_.size() ? nn::dual::softplus(pre) : pre;
    }
    return z;
}

std::pair<Var, Var> SddModel::lyapunov(const Var& x) const {
    const std::size_t rows = x.dim(0), d = dim();
    const Var shifted = ad::sub(x, ad::repeat_rows(Var::constant(equilibrium()), rows));
    Dual in{shifted, {}};
    for (std::size_t k = 0; k < d; ++k) {
        Tensor e(Shape{rows, d});
        for (std::size_t r = 0; r < rows; ++r) e[r * d + k] = 1.0;
        in.tangents.push_back(Var::constant(std::move(e)));
    }
    // g(0) on its own row; the subtraction is exact at x = x*.
    const Dual g0 = convex_net(Dual::constant(Var::constant(Tensor(Shape{1, d})), d));
    const Var g0_rows = ad::reshape(ad::repeat_rows(ad::reshape(g0.value, Shape{1}), rows), Shape{rows, 1});
    const Dual g = nn::dual::sub(convex_net(in), Dual::constant(g0_rows, d));
    const Dual quad = nn::dual::linear(nn::dual::mul(in, in), Var::constant(Tensor(Shape{1, d}, spec_.sdd_quadratic)), Var());
    const Dual v = nn::dual::add(smooth_relu(g, spec_.rehu_width), quad);
    std::vector<Var> cols(v.tangents.begin(), v.tangents.end());
    return {ad::reshape(v.value, Shape{rows}), ad::concat(cols, 1)};
}

Var SddModel::raw_field(const Var& x) const { return fhat_(x); }

Var SddModel::predict(const Var& x) const {
    if (x.shape().size() != 2 || x.dim(1) != dim()) throw ShapeError("sdd input " + ad::shape_string(x.shape()));
    const auto [v, grad] = lyapunov(x);
    return sdd_projection(fhat_(x), grad, v, spec_.sdd_alpha);
}

void SddModel::collect(ad::ParameterRefs& out) {
    fhat_.collect(out);
    icnn_in_.collect(out);
    for (std::size_t i = 0; i < icnn_mix_.size(); ++i) {
        icnn_skip_[i].collect(out);
        out.push_back(&icnn_mix_[i]);
    }
}

std::unique_ptr<model::DynamicsModel> SddModel::clone() const { return std::make_unique<SddModel>(*this); }

}  // namespace elcd::baselines
