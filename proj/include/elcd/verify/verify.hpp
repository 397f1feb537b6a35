#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "elcd/errors.hpp"
#include "elcd/random.hpp"
#include "elcd/rollout/rollout.hpp"

namespace elcd::verify {

/// Raised when the variational flow has not decayed by the truncation limit.
class NonContractingError : public NumericalError {
public:
    NonContractingError(double horizon, double psi_norm);
    double psi_norm() const noexcept { return psi_norm_; }

private:
    double psi_norm_;
};

// ---------------------------------------------------------------------------
// Exponential convergence to the equilibrium.

struct BoundConfig {
    double dt = 0.01;
    double horizon = 20.0;
};

struct BoundResult {
    double max_violation = 0.0;  // max of |x(t) - x*| / (e^{-rate t} |x0 - x*|) - 1
    std::size_t samples = 0;
    std::size_t diverged = 0;  // rollouts that produced non-finite states

    bool passed(double tolerance) const { return diverged == 0 && max_violation <= tolerance; }
};

/// RK4 rollouts from every row of `starts` (N, d). Starts at the equilibrium
/// are skipped. Divergence is counted, not thrown.
BoundResult equilibrium_bound_check(const rollout::VectorField& field, const ad::Tensor& target, double rate,
                                    const ad::Tensor& starts, const BoundConfig& cfg = {});

// ---------------------------------------------------------------------------
// Variational flow and the converse metric.

struct VariationalFlow {
    std::vector<double> times;
    std::vector<ad::Tensor> states;    // (d) per node
    std::vector<ad::Tensor> matrices;  // (d, d) per node, identity at t = 0
};

/// Joint RK4 integration of x' = f(x), Y' = Df(x) Y, Y(0) = I over
/// round(horizon / dt) steps.
VariationalFlow variational_flow(const rollout::VectorField& field, const ad::Tensor& x, double dt, double horizon);

/// Positive definite weight C(x) for rows (N, d) -> (N, d, d).
using WeightFn = std::function<ad::Tensor(const ad::Tensor&)>;

struct MetricConfig {
    double dt = 1e-3;
    double t_max = 1000.0;  // callers usually pass 50 / rate, see for_rate
    double tail_tol = 1e-6;
    WeightFn weight;        // identity when empty

    static MetricConfig for_rate(double rate);
};

struct MetricSample {
    ad::Tensor point;   // (d)
    ad::Tensor metric;  // (d, d), symmetric
    double horizon = 0.0;
    double tail_estimate = 0.0;  // estimated Frobenius mass of the truncated integral
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
};

/// Trapezoid quadrature of Y^T C Y along the flow, truncated at the first node
/// where |Y|_F <= tail_tol. Rows are integrated together and truncated
/// independently. Throws NonContractingError if some row never decays.
std::vector<MetricSample> converse_metric(const rollout::VectorField& field, const ad::Tensor& points,
                                          const MetricConfig& cfg = {});
MetricSample converse_metric_at(const rollout::VectorField& field, const ad::Tensor& point,
                                const MetricConfig& cfg = {});

/// Metric candidate on rows (N, d) -> (N, d, d).
using MetricFn = std::function<ad::Tensor(const ad::Tensor&)>;

MetricFn constant_metric(const ad::Tensor& m);
MetricFn converse_metric_fn(const rollout::VectorField& field, const MetricConfig& cfg);

constexpr double kFlowStep = 1e-4;

/// Lie derivative of M along f by a one-step RK4 flow difference, rows (N, d)
/// -> (N, d, d).
ad::Tensor metric_derivative(const rollout::VectorField& field, const MetricFn& metric, const ad::Tensor& points,
                             double h = kFlowStep);

/// M Df + Df^T M + Mdot + C at each row, (N, d, d).
ad::Tensor metric_residual(const rollout::VectorField& field, const ad::Tensor& points, const MetricFn& metric,
                           double h = kFlowStep, const WeightFn& weight = {});

struct ContractionEntry {
    ad::Tensor point;
    double lambda_max = 0.0;  // of sym(M Df + Df^T M + Mdot + 2 c M)
    double achieved_rate = 0.0;  // largest c for which the inequality holds here
    bool metric_pd = true;
    bool passed = false;
};

struct ContractionResult {
    std::vector<ContractionEntry> entries;
    double rate = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    double worst_lambda = 0.0;
    double achieved_rate = 0.0;  // min over samples
};

ContractionResult contraction_check(const rollout::VectorField& field, const MetricFn& metric, double rate,
                                    const ad::Tensor& points, double tolerance = 1e-8, double h = kFlowStep);

/// Solves M A + A^T M = -C by the vectorized d^2 system. Throws NumericalError
/// when A is not Hurwitz.
ad::Tensor lyapunov_oracle(const ad::Tensor& a, const ad::Tensor& c);

// ---------------------------------------------------------------------------
// Report.

struct Check {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

struct VerifyConfig {
    double rate = 0.05;
    double contraction_rate = -1.0;  // c; negative means 1e-3
    std::size_t samples = 10;
    std::size_t rollouts = 20;
    double inflation = 0.5;  // sampling box grows by this fraction per side
    std::uint64_t seed = 0;
    BoundConfig bound;
    MetricConfig metric;
    double bound_tolerance = 1e-3;
    double residual_tolerance = 1e-2;
    double contraction_tolerance = 1e-6;
    bool compute_metric = true;
};

struct VerifyReport {
    std::vector<ad::Tensor> points;
    std::vector<double> residual_norms;
    std::vector<double> margins;  // achieved rate per sample
    std::vector<MetricSample> metrics;
    BoundResult bound;
    double a0 = 0.0;  // max eigenvalue of M over samples
    double a1 = 0.0;  // min eigenvalue of M over samples
    ad::Tensor box_low, box_high;
    std::vector<Check> checks;

    bool passed() const;
    std::string text() const;
    std::string csv() const;  // one row per sample
};

/// Box spanning `data` rows inflated by `inflation` of the extent per side.
std::pair<ad::Tensor, ad::Tensor> sample_box(const ad::Tensor& data, double inflation);
ad::Tensor sample_points(const ad::Tensor& low, const ad::Tensor& high, std::size_t n, Rng& rng);

/// Latent coordinates in which the exponential bound holds.
struct LatentView {
    rollout::VectorField field;
    ad::Tensor target;
    std::function<ad::Tensor(const ad::Tensor&)> encode;  // rows (N, d) -> latent rows
};

/// Runs every check on `field` with equilibrium `target`, sampling points in
/// the inflated bounding box of `data` rows. With `latent`, the exponential
/// bound is checked on the latent field from encoded starts.
VerifyReport verify_field(const rollout::VectorField& field, const ad::Tensor& target, const ad::Tensor& data,
                          const VerifyConfig& cfg, const std::optional<LatentView>& latent = std::nullopt);

}  // namespace elcd::verify
