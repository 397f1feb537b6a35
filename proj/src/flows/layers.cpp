#include "elcd/flows/layers.hpp"

#include <cmath>

#include "elcd/errors.hpp"

namespace elcd::flows {

using ad::Shape;
using ad::Tensor;
using ad::Var;
using nn::Dual;

namespace {

Tensor triangle_mask(std::size_t n, bool lower) {
    Tensor m(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (lower ? j < i : j > i) m.at(i, j) = 1.0;
    return m;
}

}  // namespace

InvertibleLinear::InvertibleLinear(const std::string& name, std::vector<std::size_t> perm)
    : perm_(std::move(perm)),
      lower_(name + ".lower", Tensor(Shape{perm_.size(), perm_.size()})),
      upper_(name + ".upper", Tensor(Shape{perm_.size(), perm_.size()})),
      log_diag_(name + ".log_diag", Tensor(Shape{perm_.size()})) {
    std::vector<bool> seen(perm_.size(), false);
    for (std::size_t p : perm_) {
        if (p >= perm_.size() || seen[p]) throw ConfigError(name + ": invalid permutation");
        seen[p] = true;
    }
}

Var InvertibleLinear::matrix() const {
    const std::size_t n = dim();
    Tensor p(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) p.at(i, perm_[i]) = 1.0;
    const Var l = ad::add(ad::mul(lower_.var(), Var::constant(triangle_mask(n, true))),
                          Var::constant(Tensor::identity(n)));
    const Var u = ad::add(ad::mul(upper_.var(), Var::constant(triangle_mask(n, false))),
                          ad::diag_embed(ad::exp(log_diag_.var())));
    return ad::matmul(ad::matmul(l, u), Var::constant(std::move(p)));
}

Dual InvertibleLinear::forward(const Dual& x) const { return nn::dual::linear(x, matrix(), Var()); }

Tensor InvertibleLinear::inverse(const Tensor& z) const {
    const std::size_t n = dim(), rows = z.dim(0);
    const Tensor& l = lower_.value();
    const Tensor& u = upper_.value();
    const Tensor& ld = log_diag_.value();
    Tensor x(Shape{rows, n});
    std::vector<double> a(n), b(n);
    for (std::size_t r = 0; r < rows; ++r) {
        // L a = z, U b = a, x[perm[i]] = b[i]
        for (std::size_t i = 0; i < n; ++i) {
            double s = z[r * n + i];
            for (std::size_t j = 0; j < i; ++j) s -= l.at(i, j) * a[j];
            a[i] = s;
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = a[i];
            for (std::size_t j = i + 1; j < n; ++j) s -= u.at(i, j) * b[j];
            b[i] = s / std::exp(ld[i]);
        }
        for (std::size_t i = 0; i < n; ++i) x[r * n + perm_[i]] = b[i];
    }
    return x;
}

void InvertibleLinear::collect(ad::ParameterRefs& out) {
    out.push_back(&lower_);
    out.push_back(&upper_);
    out.push_back(&log_diag_);
}

CouplingLayer::CouplingLayer(const std::string& name, std::size_t dim, const SplineShape& spline, std::size_t hidden,
                             std::size_t blocks, Rng& rng)
    : dim_(dim),
      split_(dim / 2),
      spline_(spline),
      conditioner_(name + ".conditioner", dim / 2, hidden, blocks, (dim - dim / 2) * spline.raw_size(), rng) {
    if (dim < 2) throw ConfigError(name + ": coupling needs dimension >= 2");
}

SplineKnotsVar CouplingLayer::knot_vars(const Dual& passed) const {
    const std::size_t rows = passed.value.dim(0);
    const Dual raw = conditioner_(passed);
    return spline_knots(nn::dual::reshape(raw, Shape{rows * (dim_ - split_), spline_.raw_size()}), spline_);
}

Dual CouplingLayer::forward(const Dual& x) const {
    const std::size_t rows = x.value.dim(0);
    const Dual passed = nn::dual::slice(x, 1, 0, split_);
    const Dual moved = nn::dual::reshape(nn::dual::slice(x, 1, split_, dim_), Shape{rows * (dim_ - split_)});
    const Dual y = spline_apply(moved, knot_vars(passed));
    return nn::dual::concat({passed, nn::dual::reshape(y, Shape{rows, dim_ - split_})}, 1);
}

std::vector<SplineKnots> CouplingLayer::knots(const Tensor& x) const {
    ad::NoGradGuard guard;
    const std::size_t rows = x.dim(0), moved = dim_ - split_;
    Tensor passed(Shape{rows, split_});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < split_; ++j) passed.at(r, j) = x[r * dim_ + j];
    const SplineKnotsVar kv = knot_vars(Dual::constant(Var::constant(std::move(passed)), 0));
    const std::size_t kn = spline_.bins + 1;
    std::vector<SplineKnots> out(rows * moved);
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto take = [&](const Dual& d) {
            const auto& v = d.value.value().data();
            return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(i * kn),
                                       v.begin() + static_cast<std::ptrdiff_t>((i + 1) * kn));
        };
        out[i] = SplineKnots{take(kv.x), take(kv.y), take(kv.d)};
    }
    return out;
}

Tensor CouplingLayer::inverse(const Tensor& y) const {
    const std::size_t rows = y.dim(0), moved = dim_ - split_;
    // The passed block is unchanged, so the knots can be computed from y directly.
    const std::vector<SplineKnots> kn = knots(y);
    Tensor x = y;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < moved; ++j)
            x[r * dim_ + split_ + j] = spline_inverse(y[r * dim_ + split_ + j], kn[r * moved + j]);
    return x;
}

void CouplingLayer::collect(ad::ParameterRefs& out) { conditioner_.collect(out); }

}  // namespace elcd::flows
