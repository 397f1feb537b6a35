#include "elcd/flows/diffeo.hpp"

#include <numeric>

#include "elcd/autodiff/linalg.hpp"
#include "elcd/errors.hpp"

namespace elcd::flows {

using ad::Shape;
using ad::Tensor;
using ad::Var;
using nn::Dual;

std::string pattern_name(StackPattern p) {
    switch (p) {
        case StackPattern::Identity: return "identity";
        case StackPattern::LinearOnly: return "linear";
        case StackPattern::Full: return "full";
    }
    return "full";
}

StackPattern parse_pattern(const std::string& name) {
    if (name == "identity" || name == "none") return StackPattern::Identity;
    if (name == "linear") return StackPattern::LinearOnly;
    if (name == "full") return StackPattern::Full;
    throw ConfigError("unknown diffeo pattern '" + name + "' (expected identity, linear or full)");
}

namespace {

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    elcd::shuffle(p.begin(), p.end(), rng);
    return p;
}

}  // namespace

DiffeoStack::DiffeoStack(const DiffeoConfig& config, const std::string& name) : config_(config) {
    const std::size_t d = config.dim;
    if (d == 0) throw ConfigError("diffeo dimension must be positive");
    if (config.spline.bins < 2 || config.spline.bound <= 0.0) throw ConfigError("invalid spline shape");
    Rng rng(config.seed);
    if (config.pattern == StackPattern::LinearOnly) {
        std::vector<std::size_t> id(d);
        std::iota(id.begin(), id.end(), 0);
        layers_.emplace_back(InvertibleLinear(name + ".linear0", id));
    } else if (config.pattern == StackPattern::Full) {
        if (d < 2) throw ConfigError("full diffeo pattern needs dimension >= 2");
        // running[i] is the original coordinate at position i after the permutations so far
        std::vector<std::size_t> running(d);
        std::iota(running.begin(), running.end(), 0);
        for (std::size_t i = 0; i < 5; ++i) {
            const std::string layer_name = name + ".layer" + std::to_string(i);
            if (i % 2 == 1) {
                layers_.emplace_back(CouplingLayer(layer_name, d, config.spline, config.hidden, config.blocks, rng));
                continue;
            }
            std::vector<std::size_t> perm(d);
            if (i < 4) {
                perm = random_permutation(d, rng);
            } else {
                for (std::size_t j = 0; j < d; ++j) perm[running[j]] = j;
            }
            std::vector<std::size_t> next(d);
            for (std::size_t j = 0; j < d; ++j) next[j] = running[perm[j]];
            running = next;
            layers_.emplace_back(InvertibleLinear(layer_name, perm));
        }
    }
}

Dual DiffeoStack::forward(const Dual& x) const {
    Dual h = x;
    for (const Layer& layer : layers_) h = std::visit([&](const auto& l) { return l.forward(h); }, layer);
    return h;
}

Var DiffeoStack::forward(const Var& x) const { return forward(Dual::constant(x, 0)).value; }

DiffeoStack::Linearization DiffeoStack::linearize(const Var& x) const {
    const Shape& s = x.shape();
    if (s.size() != 2 || s[1] != dim()) {
        throw ShapeError("diffeo input " + ad::shape_string(s) + ", expected (B, " + std::to_string(dim()) + ")");
    }
    const std::size_t rows = s[0], d = s[1];
    Dual in{x, {}};
    for (std::size_t k = 0; k < d; ++k) {
        Tensor e(Shape{rows, d});
        for (std::size_t r = 0; r < rows; ++r) e.at(r, k) = 1.0;
        in.tangents.push_back(Var::constant(std::move(e)));
    }
    const Dual out = forward(in);
    std::vector<Var> columns;
    for (const Var& t : out.tangents) columns.push_back(ad::reshape(t, Shape{rows, d, 1}));
    return {out.value, ad::concat(columns, 2)};
}

Tensor DiffeoStack::forward(const Tensor& x) const {
    ad::NoGradGuard guard;
    return forward(Var::constant(x)).value();
}

Tensor DiffeoStack::inverse(const Tensor& z) const {
    if (z.rank() != 2 || z.dim(1) != dim()) {
        throw ShapeError("diffeo inverse input " + ad::shape_string(z.shape()));
    }
    Tensor x = z;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        x = std::visit([&](const auto& l) { return l.inverse(x); }, *it);
    return x;
}

Tensor DiffeoStack::jacobian(const Tensor& point) const {
    ad::NoGradGuard guard;
    const std::size_t d = dim();
    return linearize(Var::constant(point.reshaped(Shape{1, d}))).jacobian.value().reshaped(Shape{d, d});
}

Var DiffeoStack::pullback_velocity(const Var& x, const Var& v) const {
    return ad::linear_solve(linearize(x).jacobian, v);
}

void DiffeoStack::collect(ad::ParameterRefs& out) {
    for (Layer& layer : layers_) std::visit([&](auto& l) { l.collect(out); }, layer);
}

Tensor pad(const Tensor& x, std::size_t d) {
    const std::size_t rows = x.dim(0), m = x.dim(1);
    if (m > d) throw ShapeError("pad: dimension " + std::to_string(m) + " exceeds " + std::to_string(d));
    Tensor out(Shape{rows, d});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < m; ++j) out.at(r, j) = x[r * m + j];
    return out;
}

Var pad(const Var& x, std::size_t d) {
    const std::size_t rows = x.dim(0), m = x.dim(1);
    if (m > d) throw ShapeError("pad: dimension " + std::to_string(m) + " exceeds " + std::to_string(d));
    if (m == d) return x;
    return ad::concat({x, Var::constant(Tensor(Shape{rows, d - m}))}, 1);
}

Tensor unpad(const Tensor& x, std::size_t m) {
    const std::size_t rows = x.dim(0), d = x.dim(1);
    if (m > d) throw ShapeError("unpad: dimension " + std::to_string(m) + " exceeds " + std::to_string(d));
    Tensor out(Shape{rows, m});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < m; ++j) out.at(r, j) = x[r * d + j];
    return out;
}

Var unpad(const Var& x, std::size_t m) {
    if (m > x.dim(1)) {
        throw ShapeError("unpad: dimension " + std::to_string(m) + " exceeds " + std::to_string(x.dim(1)));
    }
    return ad::slice(x, 1, 0, m);
}

}  // namespace elcd::flows
