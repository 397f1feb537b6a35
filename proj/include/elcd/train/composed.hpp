#pragma once

#include "elcd/flows/diffeo.hpp"
#include "elcd/model/dynamics.hpp"
#include "elcd/model/elcd.hpp"
#include "elcd/verify/verify.hpp"

namespace elcd::train {

/// Latent ELCD behind a diffeomorphism: v = Dphi(x)^{-1} f(phi(x); phi(x*)).
/// phi(x*) is recomputed in the same pass as phi(x), so predict(x*) is exactly
/// zero whatever the parameters.
class ComposedElcd : public model::DynamicsModel {
public:
    explicit ComposedElcd(const model::ModelSpec& spec);

    const model::ModelSpec& spec() const override { return spec_; }
    ad::Var predict(const ad::Var& x) const override;
    ad::Tensor equilibrium() const override { return latent_.equilibrium().value(); }
    void collect(ad::ParameterRefs& out) override;
    std::unique_ptr<model::DynamicsModel> clone() const override;
    using model::DynamicsModel::predict;

    const flows::DiffeoStack& diffeo() const { return diffeo_; }
    flows::DiffeoStack& diffeo() { return diffeo_; }
    const model::ElcdModel& latent() const { return latent_; }
    model::ElcdModel& latent() { return latent_; }

    /// phi(x*)
    ad::Tensor latent_target() const;
    /// Latent field with target phi(x*) and the encoder, for the exponential
    /// bound. Borrows *this.
    verify::LatentView latent_view() const;

private:
    model::ModelSpec spec_;
    flows::DiffeoStack diffeo_;
    model::ElcdModel latent_;
};

}  // namespace elcd::train
