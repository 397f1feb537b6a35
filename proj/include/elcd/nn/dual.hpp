#pragma once

#include <cstdint>
#include <vector>

#include "elcd/autodiff/ops.hpp"

namespace elcd::nn {

/// A recorded value together with its directional derivatives (tangents)
/// along a fixed set of input directions. Tangents are themselves recorded,
/// so Jacobians built from them can be differentiated in reverse mode.
struct Dual {
    ad::Var value;
    std::vector<ad::Var> tangents;

    std::size_t directions() const noexcept { return tangents.size(); }
    /// Value with zero tangents.
    static Dual constant(const ad::Var& value, std::size_t directions);
};

namespace dual {

Dual add(const Dual& a, const Dual& b);
Dual sub(const Dual& a, const Dual& b);
Dual mul(const Dual& a, const Dual& b);
Dual div(const Dual& a, const Dual& b);
Dual scale(const Dual& a, double s);
Dual add_scalar(const Dual& a, double s);
Dual tanh(const Dual& a);
Dual softplus(const Dual& a);
Dual relu(const Dual& a);  // tangent uses the a.e. derivative (0 at the kink)
Dual linear(const Dual& x, const ad::Var& w, const ad::Var& b);
Dual reshape(const Dual& a, const ad::Shape& shape);
Dual slice(const Dual& a, std::size_t axis, std::size_t begin, std::size_t end);
Dual concat(const std::vector<Dual>& parts, std::size_t axis);
Dual softmax_last(const Dual& a);
Dual cumsum_last(const Dual& a);
Dual gather_last(const Dual& a, const std::vector<std::size_t>& index);
Dual select(const std::vector<std::uint8_t>& mask, const Dual& a, const Dual& b);

}  // namespace dual

}  // namespace elcd::nn
