#include "elcd/model/elcd.hpp"

#include "elcd/autodiff/jacobian.hpp"
#include "elcd/errors.hpp"

namespace elcd::model {

using ad::Shape;
using ad::Tensor;
using ad::Var;

void ElcdConfig::validate() const {
    if (dim < 1) throw ConfigError("elcd dimension must be >= 1");
    if (!(alpha > 0.0)) throw ConfigError("elcd alpha must be > 0, got " + std::to_string(alpha));
    if (hidden < 1) throw ConfigError("elcd hidden width must be >= 1");
    if (!(sym_init >= 0.0)) throw ConfigError("elcd sym_init must be >= 0");
}

MatrixNet::MatrixNet(const std::string& name, std::size_t dim, std::size_t hidden, Rng& rng, double output_range)
    : dim_(dim),
      net_(name, 2 * dim, {hidden, hidden}, dim * dim, rng, output_range > 0.0 ? nn::Init::Uniform : nn::Init::Zero,
           output_range) {}

Var MatrixNet::operator()(const Var& x, const Var& target) const {
    const std::size_t rows = x.dim(0);
    return ad::reshape(net_(ad::concat({x, target}, 1)), Shape{rows, dim_, dim_});
}

void MatrixNet::collect(ad::ParameterRefs& out) { net_.collect(out); }

namespace {

ElcdConfig validated(const ElcdConfig& c) {
    c.validate();
    return c;
}

Rng seeded(std::uint64_t seed) { return Rng(seed); }

}  // namespace

ElcdModel::ElcdModel(const ElcdConfig& config, const Tensor& equilibrium, std::uint64_t seed, const std::string& name)
    : config_(validated(config)),
      p_s_([&] {
          Rng rng = seeded(derive_seed(seed, 0));
          return MatrixNet(name + ".p_s", config.dim, config.hidden, rng, config.sym_init);
      }()),
      p_a_([&] {
          Rng rng = seeded(derive_seed(seed, 1));
          return MatrixNet(name + ".p_a", config.dim, config.hidden, rng);
      }()),
      equilibrium_(name + ".equilibrium", equilibrium.reshaped(Shape{equilibrium.size()}), config.learn_equilibrium) {
    if (equilibrium.size() != config.dim) {
        throw ShapeError("equilibrium has " + std::to_string(equilibrium.size()) + " entries, model dimension is " +
                         std::to_string(config.dim));
    }
}

void ElcdModel::check_rows(const Var& x) const {
    const Shape& s = x.shape();
    if (s.size() != 2 || s[1] != config_.dim) {
        throw ShapeError("elcd input " + ad::shape_string(s) + ", expected (B, " + std::to_string(config_.dim) + ")");
    }
}

Var ElcdModel::target_rows(std::size_t rows) const { return ad::repeat_rows(equilibrium_.var(), rows); }

Var ElcdModel::a_matrix(const Var& x, const Var& target) const {
    check_rows(x);
    check_rows(target);
    const std::size_t rows = x.dim(0), d = config_.dim;
    const Var ps = p_s_(x, target);
    const Var pa = p_a_(x, target);
    Tensor shift(Shape{rows, d, d});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < d; ++i) shift[(r * d + i) * d + i] = -config_.alpha;
    const Var sym = ad::neg(ad::matmul(ad::transpose(ps), ps));
    return ad::add(ad::add(sym, ad::sub(pa, ad::transpose(pa))), Var::constant(std::move(shift)));
}

Var ElcdModel::vector_field(const Var& x, const Var& target) const {
    return ad::matvec(a_matrix(x, target), ad::sub(x, target));
}

Var ElcdModel::vector_field(const Var& x) const {
    check_rows(x);
    return vector_field(x, target_rows(x.dim(0)));
}

Tensor ElcdModel::a_matrix_at(const Tensor& x) const {
    ad::NoGradGuard guard;
    const std::size_t d = config_.dim;
    if (x.size() != d) throw ShapeError("elcd point has " + std::to_string(x.size()) + " entries, expected " + std::to_string(d));
    return a_matrix(Var::constant(x.reshaped(Shape{1, d})), target_rows(1)).value().reshaped(Shape{d, d});
}

Tensor ElcdModel::field_at(const Tensor& x) const {
    ad::NoGradGuard guard;
    const std::size_t d = config_.dim;
    if (x.size() != d) throw ShapeError("elcd point has " + std::to_string(x.size()) + " entries, expected " + std::to_string(d));
    return vector_field(Var::constant(x.reshaped(Shape{1, d}))).value().reshaped(Shape{d});
}

Tensor ElcdModel::jacobian(const Tensor& x) const {
    const std::size_t d = config_.dim;
    if (x.size() != d) throw ShapeError("elcd point has " + std::to_string(x.size()) + " entries, expected " + std::to_string(d));
    // constant equilibrium rows: only x is differentiated
    const Tensor target = equilibrium_.value();
    return ad::jacobian(
        [&](const Var& xs) {
            return vector_field(xs, Var::constant(ad::repeat_rows(Var::constant(target), xs.dim(0)).value()));
        },
        x, d);
}

void ElcdModel::collect(ad::ParameterRefs& out) {
    p_s_.collect(out);
    p_a_.collect(out);
    if (config_.learn_equilibrium) out.push_back(&equilibrium_);
}

}  // namespace elcd::model
