#include "elcd/data/generators.hpp"

#include <cmath>

#include "elcd/autodiff/linalg.hpp"
#include "elcd/errors.hpp"
#include "elcd/ode.hpp"
#include "elcd/random.hpp"

namespace elcd::data {

using ad::Shape;
using ad::Tensor;

namespace {

using Field = std::function<std::vector<double>(const std::vector<double>&)>;

// Records dt-spaced samples from 0 to horizon, taking `substeps` RK4 steps per sample.
Trajectory integrate_recorded(const Field& f, std::vector<double> x, double dt, double horizon, std::size_t substeps) {
    const std::size_t n = x.size();
    const std::size_t steps = static_cast<std::size_t>(std::llround(horizon / dt));
    Trajectory t;
    t.times.resize(steps + 1);
    t.states = Tensor(Shape{steps + 1, n});
    t.velocities = Tensor(Shape{steps + 1, n});
    const double h = dt / static_cast<double>(substeps);
    auto rhs = [&](const std::vector<double>& s, std::vector<double>& out) { out = f(s); };
    for (std::size_t k = 0; k <= steps; ++k) {
        if (k > 0)
            for (std::size_t s = 0; s < substeps; ++s) rk4_step(rhs, x, h);
        const std::vector<double> v = f(x);
        t.times[k] = static_cast<double>(k) * dt;
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::isfinite(x[j])) throw NumericalError("generator diverged at sample " + std::to_string(k));
            t.states.at(k, j) = x[j];
            t.velocities.at(k, j) = v[j];
        }
    }
    return t;
}

// sum_{k >= max(i, j)} m_k
double tail_mass(const PendulumConfig& cfg, std::size_t from) {
    double s = 0.0;
    for (std::size_t k = from; k < cfg.links; ++k) s += cfg.mass(k);
    return s;
}

}  // namespace

void PendulumConfig::validate() const {
    if (links < 1) throw ConfigError("pendulum needs at least one link");
    if (!masses.empty() && masses.size() != links) throw ConfigError("pendulum masses must have one entry per link");
    if (!lengths.empty() && lengths.size() != links) throw ConfigError("pendulum lengths must have one entry per link");
    for (std::size_t i = 0; i < links; ++i)
        if (!(mass(i) > 0.0) || !(length(i) > 0.0)) throw ConfigError("pendulum masses and lengths must be positive");
    if (!(damping >= 0.0)) throw ConfigError("pendulum damping must be >= 0");
    if (!(dt > 0.0) || !(horizon >= dt) || substeps < 1) throw ConfigError("pendulum needs dt > 0, horizon >= dt");
    if (trajectories < 1) throw ConfigError("pendulum needs at least one trajectory");
}

nlohmann::json PendulumConfig::to_json() const {
    std::vector<double> m(links), l(links);
    for (std::size_t i = 0; i < links; ++i) {
        m[i] = mass(i);
        l[i] = length(i);
    }
    return {{"links", links},     {"masses", m},       {"lengths", l},           {"damping", damping},
            {"gravity", gravity}, {"dt", dt},          {"horizon", horizon},     {"trajectories", trajectories},
            {"substeps", substeps}, {"angle_range", angle_range}, {"seed", seed}};
}

std::vector<double> pendulum_field(const PendulumConfig& cfg, const std::vector<double>& state) {
    const std::size_t n = cfg.links;
    if (state.size() != 2 * n) throw ShapeError("pendulum state must have " + std::to_string(2 * n) + " entries");
    Tensor mass(Shape{n, n});
    Tensor rhs(Shape{n});
    for (std::size_t i = 0; i < n; ++i) {
        const double ti = state[2 * i];
        double c = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double tj = state[2 * j], wj = state[2 * j + 1];
            const double mu = tail_mass(cfg, std::max(i, j));
            mass.at(i, j) = cfg.length(i) * cfg.length(j) * std::cos(ti - tj) * mu;
            c += cfg.length(i) * cfg.length(j) * std::sin(ti - tj) * wj * wj * mu;
        }
        const double g = cfg.gravity * cfg.length(i) * std::sin(ti) * tail_mass(cfg, i);
        rhs[i] = -c - g - cfg.damping * state[2 * i + 1];
    }
    const Tensor acc = ad::solve(mass, rhs);
    std::vector<double> out(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        out[2 * i] = state[2 * i + 1];
        out[2 * i + 1] = acc[i];
    }
    return out;
}

double pendulum_energy(const PendulumConfig& cfg, const std::vector<double>& state) {
    const std::size_t n = cfg.links;
    double kinetic = 0.0, potential = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            kinetic += 0.5 * cfg.length(i) * cfg.length(j) * std::cos(state[2 * i] - state[2 * j]) *
                       tail_mass(cfg, std::max(i, j)) * state[2 * i + 1] * state[2 * j + 1];
        }
        potential -= cfg.gravity * cfg.length(i) * std::cos(state[2 * i]) * tail_mass(cfg, i);
    }
    return kinetic + potential;
}

Dataset gen_pendulum(const PendulumConfig& cfg, const std::vector<std::vector<double>>& initial_states) {
    cfg.validate();
    std::vector<Trajectory> out;
    const Field f = [&cfg](const std::vector<double>& s) { return pendulum_field(cfg, s); };
    for (const auto& x0 : initial_states) {
        if (x0.size() != 2 * cfg.links) throw ShapeError("pendulum initial state has wrong dimension");
        out.push_back(integrate_recorded(f, x0, cfg.dt, cfg.horizon, cfg.substeps));
    }
    return make_dataset(std::move(out), {{"generator", "pendulum"}, {"config", cfg.to_json()}, {"seed", cfg.seed}});
}

Dataset gen_pendulum(const PendulumConfig& cfg) {
    cfg.validate();
    std::vector<std::vector<double>> starts;
    for (std::size_t i = 0; i < cfg.trajectories; ++i) {
        Rng rng(derive_seed(cfg.seed, i));
        std::vector<double> x0(2 * cfg.links, 0.0);
        for (std::size_t j = 0; j < cfg.links; ++j) x0[2 * j] = uniform(rng, -cfg.angle_range, cfg.angle_range);
        starts.push_back(std::move(x0));
    }
    return gen_pendulum(cfg, starts);
}

Dataset gen_pendulum(PendulumConfig cfg, std::uint64_t seed) {
    cfg.seed = seed;
    return gen_pendulum(cfg);
}

void RosenbrockConfig::validate() const {
    if (dim < 1) throw ConfigError("rosenbrock dimension must be >= 1");
    if (!lambdas.empty() && lambdas.size() != dim) throw ConfigError("rosenbrock lambdas must have one entry per dimension");
    for (std::size_t i = 0; i < dim; ++i)
        if (!(lambda(i) > 0.0)) throw ConfigError("rosenbrock lambdas must be > 0");
    for (const auto& p : initial_points)
        if (p.size() != dim) throw ConfigError("rosenbrock initial point has wrong dimension");
    if (initial_points.empty() && trajectories < 1) throw ConfigError("rosenbrock needs at least one trajectory");
    if (!(dt > 0.0) || !(horizon >= dt) || substeps < 1) throw ConfigError("rosenbrock needs dt > 0, horizon >= dt");
    if (!(init_high > init_low)) throw ConfigError("rosenbrock initial range is empty");
}

nlohmann::json RosenbrockConfig::to_json() const {
    std::vector<double> l(dim);
    for (std::size_t i = 0; i < dim; ++i) l[i] = lambda(i);
    return {{"dim", dim},           {"lambdas", l},       {"trajectories", trajectories},
            {"initial_points", initial_points}, {"init_low", init_low}, {"init_high", init_high},
            {"dt", dt},             {"horizon", horizon}, {"substeps", substeps}, {"seed", seed}};
}

std::vector<double> rosenbrock_psi(const RosenbrockConfig& cfg, const std::vector<double>& x) {
    std::vector<double> psi(cfg.dim);
    psi[0] = std::sqrt(cfg.lambda(0)) * (1.0 - x[0]);
    for (std::size_t i = 1; i < cfg.dim; ++i) psi[i] = std::sqrt(cfg.lambda(i)) * (x[i] - x[i - 1] * x[i - 1]);
    return psi;
}

std::vector<double> rosenbrock_field(const RosenbrockConfig& cfg, const std::vector<double>& x) {
    if (x.size() != cfg.dim) throw ShapeError("rosenbrock state has wrong dimension");
    // Dpsi is lower bidiagonal: row 0 = -sqrt(l0) e0, row i = sqrt(li)(e_i - 2 x_{i-1} e_{i-1}).
    const std::vector<double> psi = rosenbrock_psi(cfg, x);
    std::vector<double> v(cfg.dim);
    v[0] = -2.0 * psi[0] / -std::sqrt(cfg.lambda(0));
    for (std::size_t i = 1; i < cfg.dim; ++i) {
        const double s = std::sqrt(cfg.lambda(i));
        v[i] = (-2.0 * psi[i] + s * 2.0 * x[i - 1] * v[i - 1]) / s;
    }
    return v;
}

Dataset gen_rosenbrock(const RosenbrockConfig& cfg) {
    cfg.validate();
    std::vector<std::vector<double>> starts = cfg.initial_points;
    if (starts.empty()) {
        for (std::size_t i = 0; i < cfg.trajectories; ++i) {
            Rng rng(derive_seed(cfg.seed, i));
            std::vector<double> x0(cfg.dim);
            for (double& v : x0) v = uniform(rng, cfg.init_low, cfg.init_high);
            starts.push_back(std::move(x0));
        }
    }
    const Field f = [&cfg](const std::vector<double>& s) { return rosenbrock_field(cfg, s); };
    std::vector<Trajectory> out;
    for (const auto& x0 : starts) out.push_back(integrate_recorded(f, x0, cfg.dt, cfg.horizon, cfg.substeps));
    return make_dataset(std::move(out), {{"generator", "rosenbrock"}, {"config", cfg.to_json()}, {"seed", cfg.seed}});
}

Tensor toy_linear_matrix() { return Tensor::matrix(2, 2, {-1, 4, 0, -1}); }

Tensor toy_linear_state(const Tensor& x0, double t) {
    const double e = std::exp(-t);
    return Tensor::vector({e * (x0[0] + 4.0 * t * x0[1]), e * x0[1]});
}

Dataset gen_toy_linear(double dt, double horizon) {
    if (!(dt > 0.0) || !(horizon >= dt)) throw ConfigError("toy-linear needs dt > 0, horizon >= dt");
    const Tensor a = toy_linear_matrix();
    const std::size_t steps = static_cast<std::size_t>(std::llround(horizon / dt));
    std::vector<Trajectory> out;
    for (double sign : {1.0, -1.0}) {
        const Tensor x0 = Tensor::vector({0.0, 2.0 * sign});
        Trajectory t;
        t.times.resize(steps + 1);
        t.states = Tensor(Shape{steps + 1, 2});
        t.velocities = Tensor(Shape{steps + 1, 2});
        for (std::size_t k = 0; k <= steps; ++k) {
            t.times[k] = static_cast<double>(k) * dt;
            const Tensor x = toy_linear_state(x0, t.times[k]);
            const Tensor v = ad::matvec(a, x);
            for (std::size_t j = 0; j < 2; ++j) {
                t.states.at(k, j) = x[j];
                t.velocities.at(k, j) = v[j];
            }
        }
        out.push_back(std::move(t));
    }
    return make_dataset(std::move(out),
                        {{"generator", "toy-linear"}, {"config", {{"dt", dt}, {"horizon", horizon}}}, {"seed", 0}});
}

}  // namespace elcd::data
