#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "elcd/autodiff/var.hpp"
#include "elcd/flows/diffeo.hpp"
#include "elcd/rollout/rollout.hpp"

namespace elcd::model {

enum class ModelKind { Elcd, Ncds, Sdd, Eflow };

std::string kind_name(ModelKind k);
ModelKind parse_kind(const std::string& name);

/// Everything needed to rebuild a model from scratch. Only the fields of the
/// selected kind (plus the common ones) are serialized.
struct ModelSpec {
    ModelKind kind = ModelKind::Elcd;
    std::size_t dim = 2;
    std::uint64_t seed = 0;
    std::vector<double> equilibrium;  // data-space target; zeros when empty

    // diffeo (elcd, ncds, eflow)
    flows::StackPattern pattern = flows::StackPattern::Full;
    std::size_t flow_hidden = 30;
    std::size_t flow_blocks = 2;
    std::size_t spline_bins = 10;
    double spline_bound = 10.0;

    // elcd
    double alpha = 0.05;
    std::size_t hidden = 16;
    bool learn_equilibrium = false;
    double sym_init = 0.1;

    // ncds
    std::size_t latent_dim = 2;
    double ncds_epsilon = 0.05;
    std::size_t quad_nodes = 32;
    std::vector<double> anchor;           // data-space initial anchor state
    std::vector<double> anchor_velocity;  // and its velocity

    // sdd
    double sdd_alpha = 0.05;
    std::size_t icnn_hidden = 16;
    double sdd_quadratic = 1e-3;
    double rehu_width = 0.1;

    // eflow
    double eflow_clamp = 1e-3;

    void validate() const;
    ad::Tensor equilibrium_tensor() const;
    flows::DiffeoConfig diffeo_config(std::uint64_t seed) const;
    nlohmann::json to_json() const;
    static ModelSpec from_json(const nlohmann::json& j);
};

/// Common interface of ELCD and the baselines: a learned field on data rows.
class DynamicsModel {
public:
    virtual ~DynamicsModel() = default;

    virtual const ModelSpec& spec() const = 0;
    ModelKind kind() const { return spec().kind; }
    std::size_t dim() const { return spec().dim; }

    /// Data rows (B, d) -> predicted velocities (B, d), recorded.
    virtual ad::Var predict(const ad::Var& x) const = 0;
    /// Current data-space equilibrium.
    virtual ad::Tensor equilibrium() const = 0;
    virtual void collect(ad::ParameterRefs& out) = 0;
    virtual std::unique_ptr<DynamicsModel> clone() const = 0;

    /// Untracked evaluation.
    ad::Tensor predict(const ad::Tensor& x) const;
    /// Field view; the model must outlive it.
    rollout::VectorField field() const;
    ad::ParameterRefs parameters();
};

}  // namespace elcd::model
