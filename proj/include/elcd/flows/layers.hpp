#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "elcd/flows/spline.hpp"
#include "elcd/nn/layers.hpp"

namespace elcd::flows {

/// x -> L U P x with L unit lower triangular, U upper triangular with a
/// positive diagonal exp(log_diag), and P a fixed permutation.
class InvertibleLinear {
public:
    /// perm[i] is the input coordinate routed to position i. Starts at L = U = I.
    InvertibleLinear(const std::string& name, std::vector<std::size_t> perm);

    std::size_t dim() const { return perm_.size(); }
    const std::vector<std::size_t>& permutation() const { return perm_; }
    /// The full matrix W = L U P as a recorded value.
    ad::Var matrix() const;
    nn::Dual forward(const nn::Dual& x) const;
    /// Rows of z mapped back by triangular solves.
    ad::Tensor inverse(const ad::Tensor& z) const;
    void collect(ad::ParameterRefs& out);

private:
    std::vector<std::size_t> perm_;
    ad::Parameter lower_;     // strictly lower part used
    ad::Parameter upper_;     // strictly upper part used
    ad::Parameter log_diag_;  // diagonal of U
};

/// Passes the first `split` coordinates through and maps each remaining one
/// through a spline whose knots depend on the passed coordinates.
class CouplingLayer {
public:
    CouplingLayer(const std::string& name, std::size_t dim, const SplineShape& spline, std::size_t hidden,
                  std::size_t blocks, Rng& rng);

    std::size_t dim() const { return dim_; }
    std::size_t split() const { return split_; }
    nn::Dual forward(const nn::Dual& x) const;
    ad::Tensor inverse(const ad::Tensor& y) const;
    /// Knots for every transformed coordinate of every row of x, row-major.
    std::vector<SplineKnots> knots(const ad::Tensor& x) const;
    void collect(ad::ParameterRefs& out);

private:
    SplineKnotsVar knot_vars(const nn::Dual& passed) const;

    std::size_t dim_;
    std::size_t split_;
    SplineShape spline_;
    nn::ResidualNet conditioner_;
};

}  // namespace elcd::flows
