#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "elcd/flows/layers.hpp"

namespace elcd::flows {

enum class StackPattern {
    Identity,    // no layers
    LinearOnly,  // one invertible linear layer
    Full,        // linear, coupling, linear, coupling, linear
};

std::string pattern_name(StackPattern p);
StackPattern parse_pattern(const std::string& name);

struct DiffeoConfig {
    std::size_t dim = 2;
    StackPattern pattern = StackPattern::Full;
    SplineShape spline{};
    std::size_t hidden = 30;
    std::size_t blocks = 2;
    std::uint64_t seed = 0;  // conditioner initialization and permutations
};

/// Ordered invertible layers x -> z. Starts as the identity map: linear layers
/// start at L = U = I and the permutations compose to the identity.
class DiffeoStack {
public:
    using Layer = std::variant<InvertibleLinear, CouplingLayer>;

    explicit DiffeoStack(const DiffeoConfig& config, const std::string& name = "diffeo");

    const DiffeoConfig& config() const { return config_; }
    std::size_t dim() const { return config_.dim; }
    const std::vector<Layer>& layers() const { return layers_; }

    ad::Var forward(const ad::Var& x) const;
    nn::Dual forward(const nn::Dual& x) const;

    struct Linearization {
        ad::Var value;     // (B, d)
        ad::Var jacobian;  // (B, d, d)
    };
    Linearization linearize(const ad::Var& x) const;

    /// Untracked row-wise helpers.
    ad::Tensor forward(const ad::Tensor& x) const;
    ad::Tensor inverse(const ad::Tensor& z) const;
    /// Jacobian at one point (d) -> (d, d).
    ad::Tensor jacobian(const ad::Tensor& point) const;

    /// Solves Dphi(x) u = v row by row; differentiable in parameters, x and v.
    ad::Var pullback_velocity(const ad::Var& x, const ad::Var& v) const;

    void collect(ad::ParameterRefs& out);

private:
    DiffeoConfig config_;
    std::vector<Layer> layers_;
};

/// Appends zeros up to dimension d, rows of (B, m) -> (B, d).
ad::Tensor pad(const ad::Tensor& x, std::size_t d);
ad::Var pad(const ad::Var& x, std::size_t d);
/// Keeps the first m coordinates, rows of (B, d) -> (B, m).
ad::Tensor unpad(const ad::Tensor& x, std::size_t m);
ad::Var unpad(const ad::Var& x, std::size_t m);

}  // namespace elcd::flows
