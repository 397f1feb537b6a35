#include "elcd/baselines/baselines.hpp"
#include "elcd/errors.hpp"

namespace elcd::baselines {

using ad::Shape;
using ad::Tensor;
using ad::Var;

namespace {

Tensor first(const std::vector<double>& v, std::size_t m) {
    Tensor t(Shape{m});
    for (std::size_t i = 0; i < m && i < v.size(); ++i) t[i] = v[i];
    return t;
}

nn::Mlp make_jacobian_net(const model::ModelSpec& s) {
    Rng rng(derive_seed(s.seed, 31));
    return nn::Mlp("ncds.jacobian", s.latent_dim, {s.hidden, s.hidden}, s.latent_dim * s.latent_dim, rng);
}

}  // namespace

// The diffeo starts as the identity, so the latent anchor is the leading
// coordinates of the data-space anchor.
NcdsModel::NcdsModel(const model::ModelSpec& spec)
    : spec_((spec.validate(), spec)),
      diffeo_(spec.diffeo_config(derive_seed(spec.seed, 30)), "diffeo"),
      jacobian_net_(make_jacobian_net(spec)),
      anchor_("ncds.anchor", first(spec.anchor, spec.latent_dim)),
      anchor_velocity_("ncds.anchor_velocity", first(spec.anchor_velocity, spec.latent_dim)) {
    if (spec.kind != model::ModelKind::Ncds) throw ConfigError("NcdsModel needs kind ncds");
}

Var NcdsModel::latent_jacobian(const Var& z) const {
    const std::size_t rows = z.dim(0), m = spec_.latent_dim;
    const Var j = ad::reshape(jacobian_net_(z), Shape{rows, m, m});
    Tensor eps(Shape{rows, m, m});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < m; ++i) eps[(r * m + i) * m + i] = spec_.ncds_epsilon;
    return ad::neg(ad::add(ad::matmul(ad::transpose(j), j), Var::constant(std::move(eps))));
}

Var NcdsModel::latent_field(const Var& z, std::size_t nodes) const {
    if (z.shape().size() != 2 || z.dim(1) != spec_.latent_dim) {
        throw ShapeError("ncds latent input " + ad::shape_string(z.shape()));
    }
    if (nodes < 2) throw ConfigError("ncds needs at least 2 quadrature nodes");
    const std::size_t rows = z.dim(0), m = spec_.latent_dim, n = nodes;
    const Var delta = ad::sub(z, ad::repeat_rows(anchor_.var(), rows));  // (B, m)
    const Var delta_rep = ad::repeat_interleave(delta, n);             // (B n, m)
    Tensor t(Shape{rows * n, m}), w(Shape{rows * n, m});
    const double h = 1.0 / static_cast<double>(n - 1);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < m; ++k) {
                t[(r * n + i) * m + k] = static_cast<double>(i) * h;
                w[(r * n + i) * m + k] = (i == 0 || i + 1 == n) ? 0.5 * h : h;
            }
    const Var nodes_pts = ad::add(ad::repeat_rows(anchor_.var(), rows * n), ad::mul(Var::constant(std::move(t)), delta_rep));
    const std::size_t count = rows * n;
    const Var j = ad::reshape(jacobian_net_(nodes_pts), Shape{count, m, m});
    // Df delta = -(J^T (J delta) + eps delta)
    const Var jd = ad::matvec(j, delta_rep);
    const Var integrand = ad::neg(ad::add(ad::matvec(ad::transpose(j), jd), ad::scale(delta_rep, spec_.ncds_epsilon)));
    const Var weighted = ad::reshape(ad::mul(Var::constant(std::move(w)), integrand), Shape{rows, n, m});
    return ad::add(ad::repeat_rows(anchor_velocity_.var(), rows), ad::sum_axis(weighted, 1));
}

Var NcdsModel::predict(const Var& x) const {
    if (x.shape().size() != 2 || x.dim(1) != dim()) throw ShapeError("ncds input " + ad::shape_string(x.shape()));
    const std::size_t d = dim(), m = spec_.latent_dim;
    if (spec_.pattern == flows::StackPattern::Identity) return flows::pad(latent_field(flows::unpad(x, m)), d);
    const auto lin = diffeo_.linearize(x);
    const Var v = flows::pad(latent_field(flows::unpad(lin.value, m)), d);
    return ad::linear_solve(lin.jacobian, v);
}

void NcdsModel::collect(ad::ParameterRefs& out) {
    diffeo_.collect(out);
    jacobian_net_.collect(out);
    out.push_back(&anchor_);
    out.push_back(&anchor_velocity_);
}

std::unique_ptr<model::DynamicsModel> NcdsModel::clone() const { return std::make_unique<NcdsModel>(*this); }

}  // namespace elcd::baselines
