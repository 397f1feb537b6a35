#pragma once

#include <cstdint>

#include "elcd/nn/layers.hpp"

namespace elcd::model {

struct ElcdConfig {
    std::size_t dim = 2;
    double alpha = 0.05;
    std::size_t hidden = 16;
    bool learn_equilibrium = false;
    /// Output layer of P_s starts at U(-r, r). P_s = 0 is a stationary point of
    /// -Ps^T Ps, so r = 0 (exact -alpha I start) leaves P_s untrainable.
    double sym_init = 0.1;

    void validate() const;
};

/// (x, x*) -> d x d matrix through a tanh network on concat(x, x*).
class MatrixNet {
public:
    /// Output layer zero when `output_range` is 0, else U(-range, range).
    MatrixNet(const std::string& name, std::size_t dim, std::size_t hidden, Rng& rng, double output_range = 0.0);

    /// x, x* (B, d) -> (B, d, d)
    ad::Var operator()(const ad::Var& x, const ad::Var& target) const;
    void collect(ad::ParameterRefs& out);

private:
    std::size_t dim_;
    nn::Mlp net_;
};

/// f(x) = A(x, x*)(x - x*) with A = -Ps^T Ps + Pa - Pa^T - alpha I.
class ElcdModel {
public:
    ElcdModel(const ElcdConfig& config, const ad::Tensor& equilibrium, std::uint64_t seed,
              const std::string& name = "elcd");

    const ElcdConfig& config() const { return config_; }
    std::size_t dim() const { return config_.dim; }
    const ad::Parameter& equilibrium() const { return equilibrium_; }
    ad::Parameter& equilibrium() { return equilibrium_; }

    /// Batched forms; `target` holds one equilibrium row per input row.
    ad::Var a_matrix(const ad::Var& x, const ad::Var& target) const;
    ad::Var vector_field(const ad::Var& x, const ad::Var& target) const;
    /// Uses the model's own equilibrium.
    ad::Var vector_field(const ad::Var& x) const;

    /// Single-point helpers, untracked.
    ad::Tensor a_matrix_at(const ad::Tensor& x) const;
    ad::Tensor field_at(const ad::Tensor& x) const;
    /// Exact Jacobian of the field at x (d) -> (d, d).
    ad::Tensor jacobian(const ad::Tensor& x) const;

    void collect(ad::ParameterRefs& out);

private:
    ad::Var target_rows(std::size_t rows) const;
    void check_rows(const ad::Var& x) const;

    ElcdConfig config_;
    MatrixNet p_s_;
    MatrixNet p_a_;
    ad::Parameter equilibrium_;
};

}  // namespace elcd::model
