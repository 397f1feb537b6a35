#include "elcd/nn/dual.hpp"

#include "elcd/errors.hpp"

namespace elcd::nn {

using ad::Var;

Dual Dual::constant(const Var& value, std::size_t directions) {
    Dual d{value, {}};
    const Var zero = Var::constant(ad::Tensor(value.shape()));
    d.tangents.assign(directions, zero);
    return d;
}

namespace dual {

namespace {

void require_same_directions(const Dual& a, const Dual& b) {
    if (a.directions() != b.directions()) {
        throw ShapeError("dual operands carry " + std::to_string(a.directions()) + " and " +
                         std::to_string(b.directions()) + " tangent directions");
    }
}

template <class F>
Dual map_tangents(Var value, const Dual& a, F f) {
    Dual out{std::move(value), {}};
    out.tangents.reserve(a.directions());
    for (const Var& t : a.tangents) out.tangents.push_back(f(t));
    return out;
}

}  // namespace

Dual add(const Dual& a, const Dual& b) {
    require_same_directions(a, b);
    Dual out{ad::add(a.value, b.value), {}};
    for (std::size_t i = 0; i < a.directions(); ++i) out.tangents.push_back(ad::add(a.tangents[i], b.tangents[i]));
    return out;
}

Dual sub(const Dual& a, const Dual& b) {
    require_same_directions(a, b);
    Dual out{ad::sub(a.value, b.value), {}};
    for (std::size_t i = 0; i < a.directions(); ++i) out.tangents.push_back(ad::sub(a.tangents[i], b.tangents[i]));
    return out;
}

Dual mul(const Dual& a, const Dual& b) {
    require_same_directions(a, b);
    Dual out{ad::mul(a.value, b.value), {}};
    for (std::size_t i = 0; i < a.directions(); ++i) {
        out.tangents.push_back(ad::add(ad::mul(a.tangents[i], b.value), ad::mul(a.value, b.tangents[i])));
    }
    return out;
}

Dual div(const Dual& a, const Dual& b) {
    require_same_directions(a, b);
    Var q = ad::div(a.value, b.value);
    Dual out{q, {}};
    for (std::size_t i = 0; i < a.directions(); ++i) {
        // (a/b)' = (a' - q b') / b
        out.tangents.push_back(ad::div(ad::sub(a.tangents[i], ad::mul(q, b.tangents[i])), b.value));
    }
    return out;
}

Dual scale(const Dual& a, double s) {
    return map_tangents(ad::scale(a.value, s), a, [s](const Var& t) { return ad::scale(t, s); });
}

Dual add_scalar(const Dual& a, double s) {
    return map_tangents(ad::add_scalar(a.value, s), a, [](const Var& t) { return t; });
}

Dual tanh(const Dual& a) {
    Var y = ad::tanh(a.value);
    Var dy = ad::add_scalar(ad::neg(ad::square(y)), 1.0);
    return map_tangents(y, a, [&dy](const Var& t) { return ad::mul(dy, t); });
}

Dual softplus(const Dual& a) {
    Var s = ad::sigmoid(a.value);
    return map_tangents(ad::softplus(a.value), a, [&s](const Var& t) { return ad::mul(s, t); });
}

Dual relu(const Dual& a) {
    ad::Tensor step(a.value.shape());
    for (std::size_t i = 0; i < step.size(); ++i) step[i] = a.value.value()[i] > 0.0 ? 1.0 : 0.0;
    const Var s = Var::constant(std::move(step));
    return map_tangents(ad::relu(a.value), a, [&s](const Var& t) { return ad::mul(s, t); });
}

Dual linear(const Dual& x, const Var& w, const Var& b) {
    return map_tangents(ad::linear(x.value, w, b), x, [&w](const Var& t) { return ad::linear(t, w); });
}

Dual reshape(const Dual& a, const ad::Shape& shape) {
    return map_tangents(ad::reshape(a.value, shape), a, [&shape](const Var& t) { return ad::reshape(t, shape); });
}

Dual slice(const Dual& a, std::size_t axis, std::size_t begin, std::size_t end) {
    return map_tangents(ad::slice(a.value, axis, begin, end), a,
                        [&](const Var& t) { return ad::slice(t, axis, begin, end); });
}

Dual concat(const std::vector<Dual>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("dual concat of zero parts");
    std::vector<Var> values;
    for (const Dual& p : parts) {
        require_same_directions(parts[0], p);
        values.push_back(p.value);
    }
    Dual out{ad::concat(values, axis), {}};
    for (std::size_t i = 0; i < parts[0].directions(); ++i) {
        std::vector<Var> ts;
        for (const Dual& p : parts) ts.push_back(p.tangents[i]);
        out.tangents.push_back(ad::concat(ts, axis));
    }
    return out;
}

Dual softmax_last(const Dual& a) {
    Var s = ad::softmax_last(a.value);
    const std::size_t n = a.value.shape().back();
    const std::size_t axis = a.value.shape().size() - 1;
    return map_tangents(s, a, [&](const Var& t) {
        // s * (t - <s, t>)
        Var dot = ad::expand_last(ad::sum_axis(ad::mul(s, t), axis), n);
        return ad::mul(s, ad::sub(t, dot));
    });
}

Dual cumsum_last(const Dual& a) {
    return map_tangents(ad::cumsum_last(a.value), a, [](const Var& t) { return ad::cumsum_last(t); });
}

Dual gather_last(const Dual& a, const std::vector<std::size_t>& index) {
    return map_tangents(ad::gather_last(a.value, index), a,
                        [&index](const Var& t) { return ad::gather_last(t, index); });
}

Dual select(const std::vector<std::uint8_t>& mask, const Dual& a, const Dual& b) {
    require_same_directions(a, b);
    Dual out{ad::select(mask, a.value, b.value), {}};
    for (std::size_t i = 0; i < a.directions(); ++i) out.tangents.push_back(ad::select(mask, a.tangents[i], b.tangents[i]));
    return out;
}

}  // namespace dual

}  // namespace elcd::nn
