#include "elcd/train/trainer.hpp"

#include <cmath>

#include "elcd/baselines/baselines.hpp"
#include "elcd/errors.hpp"
#include "elcd/train/composed.hpp"

namespace elcd::train {

using ad::Shape;
using ad::Tensor;
using ad::Var;

std::unique_ptr<model::DynamicsModel> make_model(const model::ModelSpec& spec) {
    switch (spec.kind) {
        case model::ModelKind::Elcd: return std::make_unique<ComposedElcd>(spec);
        case model::ModelKind::Ncds: return std::make_unique<baselines::NcdsModel>(spec);
        case model::ModelKind::Sdd: return std::make_unique<baselines::SddModel>(spec);
        case model::ModelKind::Eflow: return std::make_unique<baselines::EflowModel>(spec);
    }
    throw ConfigError("unknown model kind");
}

Tensor final_state_mean(const data::Dataset& dataset) {
    dataset.validate();
    const std::size_t d = dataset.dim();
    Tensor mean(Shape{d});
    for (const auto& t : dataset.trajectories)
        for (std::size_t k = 0; k < d; ++k) mean[k] += t.states.at(t.length() - 1, k);
    for (std::size_t k = 0; k < d; ++k) mean[k] /= static_cast<double>(dataset.trajectories.size());
    return mean;
}

namespace {

std::vector<double> to_vector(const Tensor& t) { return {t.raw(), t.raw() + t.size()}; }

}  // namespace

model::ModelSpec spec_for(model::ModelKind kind, const data::Dataset& dataset, std::uint64_t seed) {
    model::ModelSpec s;
    s.kind = kind;
    s.dim = dataset.dim();
    s.seed = seed;
    s.equilibrium = to_vector(final_state_mean(dataset));
    if (kind == model::ModelKind::Ncds) {
        s.latent_dim = std::min<std::size_t>(2, s.dim);
        const auto& t = dataset.trajectories.front();
        s.anchor = to_vector(t.states.row(0));
        s.anchor_velocity = to_vector(t.velocities.row(0));
    }
    return s;
}

void Adam::step(const ad::ParameterRefs& params, const ad::GradientMap& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (ad::Parameter* p : params) {
        if (!p->trainable() || !grads.contains(p->id())) continue;
        const Tensor& g = grads.at(p->id());
        auto it = moments_.find(p->id());
        if (it == moments_.end()) {
            it = moments_.emplace(p->id(), std::pair{Tensor::zeros_like(g), Tensor::zeros_like(g)}).first;
        }
        Tensor& m = it->second.first;
        Tensor& v = it->second.second;
        auto values = p->mutable_values();
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g[i];
            v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g[i] * g[i];
            values[i] -= opts_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opts_.eps);
        }
    }
}

Var velocity_loss(const model::DynamicsModel& m, const Tensor& states, const Tensor& velocities) {
    if (states.shape() != velocities.shape() || states.rank() != 2) {
        throw ShapeError("loss batch " + ad::shape_string(states.shape()) + " vs " + ad::shape_string(velocities.shape()));
    }
    const Var diff = ad::sub(m.predict(Var::constant(states)), Var::constant(velocities));
    return ad::scale(ad::sum(ad::square(diff)), 1.0 / static_cast<double>(states.dim(0)));
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0)) {
        throw ConfigError("bad Adam constants");
    }
}

nlohmann::json TrainConfig::to_json() const {
    return {{"epochs", epochs}, {"batch_size", batch_size}, {"lr", lr},       {"beta1", beta1},
            {"beta2", beta2},   {"eps", eps},               {"seed", seed},   {"max_steps", max_steps}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.lr = j.value("lr", c.lr);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.eps = j.value("eps", c.eps);
        c.seed = j.value("seed", c.seed);
        c.max_steps = j.value("max_steps", c.max_steps);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    return c;
}

TrainResult train(model::DynamicsModel& m, const data::Dataset& dataset, const TrainConfig& cfg,
                  const std::function<void(const EpochReport&)>& on_epoch) {
    cfg.validate();
    dataset.validate();
    if (dataset.dim() != m.dim()) {
        throw ShapeError("dataset dimension " + std::to_string(dataset.dim()) + " vs model " + std::to_string(m.dim()));
    }
    const Tensor xs = dataset.pooled_states();
    const Tensor vs = dataset.pooled_velocities();
    const std::size_t n = xs.dim(0), d = xs.dim(1);
    const ad::ParameterRefs params = m.parameters();
    Adam opt({cfg.lr, cfg.beta1, cfg.beta2, cfg.eps});
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(n);
    TrainResult res;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.max_steps && res.steps >= cfg.max_steps) break;
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0, batch = 0; start < n; start += cfg.batch_size, ++batch) {
            if (cfg.max_steps && res.steps >= cfg.max_steps) break;
            const std::size_t b = std::min(cfg.batch_size, n - start);
            Tensor bx(Shape{b, d}), bv(Shape{b, d});
            for (std::size_t r = 0; r < b; ++r)
                for (std::size_t k = 0; k < d; ++k) {
                    bx[r * d + k] = xs[order[start + r] * d + k];
                    bv[r * d + k] = vs[order[start + r] * d + k];
                }
            const Var loss = velocity_loss(m, bx, bv);
            const double value = loss.value().item();
            if (!std::isfinite(value)) {
                throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                                     std::to_string(batch));
            }
            opt.step(params, ad::backward(loss));
            ++res.steps;
            total += value * static_cast<double>(b);
            seen += b;
        }
        res.history.push_back(total / static_cast<double>(seen));
        if (on_epoch) on_epoch({epoch, res.history.back(), res.steps});
    }
    return res;
}

}  // namespace elcd::train
