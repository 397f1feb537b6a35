#pragma once

#include "elcd/flows/diffeo.hpp"
#include "elcd/model/dynamics.hpp"
#include "elcd/nn/layers.hpp"

namespace elcd::baselines {

/// Closed-form projection of fhat onto {u : grad_v^T u <= -alpha v}, row-wise
/// on (B, d), (B, d), (B). Rows with grad_v = 0 return 0.
ad::Var sdd_projection(const ad::Var& fhat, const ad::Var& grad_v, const ad::Var& v, double alpha);

/// Unconstrained field projected through a learned convex Lyapunov function
/// V(x) = smooth_relu(g(x - x*) - g(0)) + eps |x - x*|^2 with g input-convex.
class SddModel : public model::DynamicsModel {
public:
    explicit SddModel(const model::ModelSpec& spec);

    const model::ModelSpec& spec() const override { return spec_; }
    ad::Var predict(const ad::Var& x) const override;
    ad::Tensor equilibrium() const override { return spec_.equilibrium_tensor(); }
    void collect(ad::ParameterRefs& out) override;
    std::unique_ptr<model::DynamicsModel> clone() const override;
    using model::DynamicsModel::predict;

    /// V (B) and its gradient (B, d) at data rows, recorded.
    std::pair<ad::Var, ad::Var> lyapunov(const ad::Var& x) const;
    ad::Var raw_field(const ad::Var& x) const;  // fhat

private:
    nn::Dual convex_net(const nn::Dual& x) const;  // g, (B, 1)

    model::ModelSpec spec_;
    nn::Mlp fhat_;
    nn::Dense icnn_in_;
    std::vector<nn::Dense> icnn_skip_;     // x -> hidden, per later layer
    std::vector<ad::Parameter> icnn_mix_;  // squared: hidden -> hidden / 1
};

/// Latent field whose Jacobian is -(J^T J + eps I), recovered by a trapezoid
/// line integral from a trainable anchor. Latent dimension m <= d via unpad.
class NcdsModel : public model::DynamicsModel {
public:
    explicit NcdsModel(const model::ModelSpec& spec);

    const model::ModelSpec& spec() const override { return spec_; }
    ad::Var predict(const ad::Var& x) const override;
    ad::Tensor equilibrium() const override { return spec_.equilibrium_tensor(); }
    void collect(ad::ParameterRefs& out) override;
    std::unique_ptr<model::DynamicsModel> clone() const override;
    using model::DynamicsModel::predict;

    /// Latent rows (B, m) -> (B, m, m).
    ad::Var latent_jacobian(const ad::Var& z) const;
    /// Latent rows (B, m) -> (B, m), with `nodes` quadrature nodes.
    ad::Var latent_field(const ad::Var& z, std::size_t nodes) const;
    ad::Var latent_field(const ad::Var& z) const { return latent_field(z, spec_.quad_nodes); }

    const flows::DiffeoStack& diffeo() const { return diffeo_; }
    ad::Parameter& anchor() { return anchor_; }
    ad::Parameter& anchor_velocity() { return anchor_velocity_; }
    ad::Tensor anchor_value() const { return anchor_.value(); }

private:
    model::ModelSpec spec_;
    flows::DiffeoStack diffeo_;
    nn::Mlp jacobian_net_;
    ad::Parameter anchor_;
    ad::Parameter anchor_velocity_;
};

/// Riemannian descent of |psi(x) - psi(x*)| under the metric Dpsi^T Dpsi:
/// v = -Dpsi(x)^{-1} g, g = r / max(|r|, delta), r = psi(x) - psi(x*).
class EflowModel : public model::DynamicsModel {
public:
    explicit EflowModel(const model::ModelSpec& spec);

    const model::ModelSpec& spec() const override { return spec_; }
    ad::Var predict(const ad::Var& x) const override;
    ad::Tensor equilibrium() const override { return spec_.equilibrium_tensor(); }
    void collect(ad::ParameterRefs& out) override;
    std::unique_ptr<model::DynamicsModel> clone() const override;
    using model::DynamicsModel::predict;

    /// |psi(x) - psi(x*)| per row, untracked.
    std::vector<double> potential(const ad::Tensor& x) const;
    const flows::DiffeoStack& diffeo() const { return diffeo_; }
    flows::DiffeoStack& diffeo() { return diffeo_; }

private:
    model::ModelSpec spec_;
    flows::DiffeoStack diffeo_;
};

}  // namespace elcd::baselines
