#pragma once

#include <functional>
#include <string>
#include <vector>

#include "elcd/autodiff/jacobian.hpp"
#include "elcd/data/dataset.hpp"

namespace elcd::rollout {

/// Autonomous field on R^d. `eval` maps rows (B, d) -> (B, d); `jacobian`
/// (optional) maps rows (B, d) -> (B, d, d).
struct VectorField {
    std::size_t dim = 0;
    std::function<ad::Tensor(const ad::Tensor&)> eval;
    std::function<ad::Tensor(const ad::Tensor&)> jacobian;

    ad::Tensor at(const ad::Tensor& point) const;
    ad::Tensor jacobian_at(const ad::Tensor& point) const;  // (d, d)
};

/// Linear field x' = A x with its constant Jacobian.
VectorField linear_field(const ad::Tensor& a);

/// Wraps a recorded row-wise map. Evaluation runs without recording; the
/// Jacobian uses one reverse pass per batch.
VectorField from_batch_fn(std::size_t dim, ad::BatchFn f);

enum class Scheme { Euler, Rk4 };

std::string scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);

struct IntegratorConfig {
    Scheme scheme = Scheme::Rk4;
    double dt = 0.01;
    double horizon = 1.0;

    void validate() const;
    std::size_t steps() const;
};

/// Fixed-step rollouts of several initial states at once, rows of x0 (N, d).
/// Records round(horizon / dt) + 1 states with field-evaluated velocities.
/// Throws NumericalError naming the step when a state becomes non-finite.
std::vector<data::Trajectory> integrate_batch(const VectorField& field, const ad::Tensor& x0,
                                              const IntegratorConfig& cfg);
data::Trajectory integrate(const VectorField& field, const ad::Tensor& x0, const IntegratorConfig& cfg);

/// Mean nearest-neighbor distance from a to b plus from b to a (Euclidean),
/// over state rows (T, d).
double dtwd(const ad::Tensor& a, const ad::Tensor& b);
double dtwd(const data::Trajectory& a, const data::Trajectory& b);

struct EvalSummary {
    std::vector<double> scores;
    double mean = 0.0;
    double std = 0.0;  // population

    static EvalSummary from_scores(std::vector<double> scores);

    std::string text(const std::string& model, const std::string& dataset) const;
    static std::string csv_header();  // model,dataset,mean,std,n
    std::string csv_row(const std::string& model, const std::string& dataset) const;
};

double median_interval(const data::Trajectory& t);

/// Rolls out from each demonstration's first state over its duration (step =
/// its median sampling interval) and scores the rollout against it.
EvalSummary eval_model(const VectorField& field, const data::Dataset& dataset, Scheme scheme = Scheme::Rk4);

}  // namespace elcd::rollout
