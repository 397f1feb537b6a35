#include "elcd/train/composed.hpp"

#include "elcd/errors.hpp"

namespace elcd::train {

using ad::Shape;
using ad::Tensor;
using ad::Var;

namespace {

model::ElcdConfig latent_config(const model::ModelSpec& s) {
    model::ElcdConfig c;
    c.dim = s.dim;
    c.alpha = s.alpha;
    c.hidden = s.hidden;
    c.learn_equilibrium = s.learn_equilibrium;
    c.sym_init = s.sym_init;
    return c;
}

const model::ModelSpec& checked(const model::ModelSpec& s) {
    if (s.kind != model::ModelKind::Elcd) throw ConfigError("composed model needs kind elcd");
    s.validate();
    return s;
}

}  // namespace

ComposedElcd::ComposedElcd(const model::ModelSpec& spec)
    : spec_(checked(spec)),
      diffeo_(spec.diffeo_config(derive_seed(spec.seed, 10)), "diffeo"),
      latent_(latent_config(spec), spec.equilibrium_tensor(), derive_seed(spec.seed, 11), "elcd") {}

Var ComposedElcd::predict(const Var& x) const {
    const std::size_t d = dim();
    if (x.shape().size() != 2 || x.dim(1) != d) {
        throw ShapeError("model input " + ad::shape_string(x.shape()) + ", expected (B, " + std::to_string(d) + ")");
    }
    const std::size_t rows = x.dim(0);
    const Var xs = ad::concat({x, ad::reshape(latent_.equilibrium().var(), Shape{1, d})}, 0);
    auto split = [&](const Var& all) {
        const Var z = ad::slice(all, 0, 0, rows);
        const Var zt = ad::repeat_rows(ad::reshape(ad::slice(all, 0, rows, rows + 1), Shape{d}), rows);
        return std::pair{z, zt};
    };
    if (spec_.pattern == flows::StackPattern::Identity) {
        const auto [z, zt] = split(xs);
        return latent_.vector_field(z, zt);
    }
    const auto lin = diffeo_.linearize(xs);
    const auto [z, zt] = split(lin.value);
    const Var v = latent_.vector_field(z, zt);
    return ad::linear_solve(ad::slice(lin.jacobian, 0, 0, rows), v);
}

void ComposedElcd::collect(ad::ParameterRefs& out) {
    diffeo_.collect(out);
    latent_.collect(out);
}

std::unique_ptr<model::DynamicsModel> ComposedElcd::clone() const { return std::make_unique<ComposedElcd>(*this); }

Tensor ComposedElcd::latent_target() const {
    return diffeo_.forward(equilibrium().reshaped(Shape{1, dim()})).reshaped(Shape{dim()});
}

verify::LatentView ComposedElcd::latent_view() const {
    const Tensor target = latent_target();
    const model::ElcdModel* latent = &latent_;
    verify::LatentView view;
    view.target = target;
    view.field = rollout::from_batch_fn(dim(), [latent, target](const Var& z) {
        return latent->vector_field(z, ad::repeat_rows(Var::constant(target), z.dim(0)));
    });
    const flows::DiffeoStack* phi = &diffeo_;
    view.encode = [phi](const Tensor& x) { return phi->forward(x); };
    return view;
}

}  // namespace elcd::train
