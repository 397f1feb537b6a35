#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>

#include "elcd/data/dataset.hpp"
#include "elcd/model/dynamics.hpp"

namespace elcd::train {

std::unique_ptr<model::DynamicsModel> make_model(const model::ModelSpec& spec);

/// Equilibrium estimate in stored units: mean of the final states.
ad::Tensor final_state_mean(const data::Dataset& dataset);

/// Spec for `kind` fitted to the dataset: dimension, equilibrium and (for
/// ncds) the anchor at the first sample of the first trajectory.
model::ModelSpec spec_for(model::ModelKind kind, const data::Dataset& dataset, std::uint64_t seed);

class Adam {
public:
    struct Options {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    explicit Adam(Options opts) : opts_(opts) {}
    /// Updates every parameter that has a gradient in `grads`.
    void step(const ad::ParameterRefs& params, const ad::GradientMap& grads);
    std::size_t steps() const { return t_; }

private:
    Options opts_;
    std::size_t t_ = 0;
    std::map<std::string, std::pair<ad::Tensor, ad::Tensor>> moments_;
};

/// (1/B) sum_i |predict(x_i) - v_i|^2
ad::Var velocity_loss(const model::DynamicsModel& m, const ad::Tensor& states, const ad::Tensor& velocities);

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 100;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    std::size_t max_steps = 0;  // 0 = no limit

    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; unknown keys are ignored.
    static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochReport {
    std::size_t epoch = 0;
    double loss = 0.0;  // sample-weighted mean of batch losses
    std::size_t steps = 0;
};

struct TrainResult {
    std::vector<double> history;  // per-epoch mean loss
    std::size_t steps = 0;
};

/// Minibatch Adam on pooled (x, v) pairs, reshuffled every epoch from `seed`.
/// Throws NumericalError naming epoch and batch on a non-finite loss. The
/// callback runs after every epoch.
TrainResult train(model::DynamicsModel& m, const data::Dataset& dataset, const TrainConfig& cfg,
                  const std::function<void(const EpochReport&)>& on_epoch = {});

}  // namespace elcd::train
