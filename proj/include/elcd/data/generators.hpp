#pragma once

#include <cstdint>
#include <vector>

#include "elcd/data/dataset.hpp"

namespace elcd::data {

/// n-link planar pendulum of point masses, angles from the downward
/// vertical, viscous damping on every joint.
struct PendulumConfig {
    std::size_t links = 2;
    std::vector<double> masses;   // empty: all 1
    std::vector<double> lengths;  // empty: all 1
    double damping = 2.0;
    double gravity = 9.81;
    double dt = 0.01;
    double horizon = 20.0;
    std::size_t trajectories = 6;
    std::size_t substeps = 1;  // integration steps per recorded sample
    double angle_range = 1.5707963267948966;  // initial angles in [-range, range]
    std::uint64_t seed = 0;

    void validate() const;
    double mass(std::size_t i) const { return masses.empty() ? 1.0 : masses[i]; }
    double length(std::size_t i) const { return lengths.empty() ? 1.0 : lengths[i]; }
    nlohmann::json to_json() const;
};

/// State layout (theta_1, dtheta_1, ..., theta_n, dtheta_n).
std::vector<double> pendulum_field(const PendulumConfig& cfg, const std::vector<double>& state);
double pendulum_energy(const PendulumConfig& cfg, const std::vector<double>& state);
/// Trajectories from explicit initial states.
Dataset gen_pendulum(const PendulumConfig& cfg, const std::vector<std::vector<double>>& initial_states);
Dataset gen_pendulum(const PendulumConfig& cfg);
Dataset gen_pendulum(PendulumConfig cfg, std::uint64_t seed);

/// Riemannian gradient flow of f = |psi|^2 with
/// psi = (sqrt(l1)(1 - x1), sqrt(l2)(x2 - x1^2), ..., sqrt(ln)(xn - x{n-1}^2)).
struct RosenbrockConfig {
    std::size_t dim = 8;
    std::vector<double> lambdas;  // empty: (1, 100, ..., 100)
    std::size_t trajectories = 4;
    std::vector<std::vector<double>> initial_points;  // empty: uniform in [init_low, init_high]^n
    double init_low = 0.0;
    double init_high = 1.0;
    double dt = 0.01;
    double horizon = 10.0;
    std::size_t substeps = 10;
    std::uint64_t seed = 0;

    void validate() const;
    double lambda(std::size_t i) const { return lambdas.empty() ? (i == 0 ? 1.0 : 100.0) : lambdas[i]; }
    nlohmann::json to_json() const;
};

std::vector<double> rosenbrock_psi(const RosenbrockConfig& cfg, const std::vector<double>& x);
/// x' = -2 Dpsi(x)^-1 psi(x), solved by forward substitution.
std::vector<double> rosenbrock_field(const RosenbrockConfig& cfg, const std::vector<double>& x);
Dataset gen_rosenbrock(const RosenbrockConfig& cfg);

/// x' = A x with A = [[-1, 4], [0, -1]] from (0, 2) and (0, -2), sampled from
/// the closed form.
ad::Tensor toy_linear_matrix();
ad::Tensor toy_linear_state(const ad::Tensor& x0, double t);
Dataset gen_toy_linear(double dt = 0.01, double horizon = 5.0);

}  // namespace elcd::data
