#include "elcd/rollout/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "elcd/errors.hpp"

namespace elcd::rollout {

using ad::Shape;
using ad::Tensor;

Tensor VectorField::at(const Tensor& point) const {
    return eval(point.reshaped(Shape{1, dim})).reshaped(Shape{dim});
}

Tensor VectorField::jacobian_at(const Tensor& point) const {
    if (!jacobian) throw ConfigError("field has no Jacobian");
    return jacobian(point.reshaped(Shape{1, dim})).reshaped(Shape{dim, dim});
}

VectorField linear_field(const Tensor& a) {
    if (a.rank() != 2 || a.dim(0) != a.dim(1)) throw ShapeError("linear field needs a square matrix");
    const std::size_t d = a.dim(0);
    VectorField f;
    f.dim = d;
    f.eval = [a](const Tensor& x) { return ad::transpose(ad::matmul(a, ad::transpose(x))); };
    f.jacobian = [a, d](const Tensor& x) {
        const std::size_t n = x.dim(0);
        Tensor j(Shape{n, d, d});
        for (std::size_t r = 0; r < n; ++r) std::copy_n(a.raw(), d * d, j.raw() + r * d * d);
        return j;
    };
    return f;
}

VectorField from_batch_fn(std::size_t dim, ad::BatchFn fn) {
    VectorField f;
    f.dim = dim;
    f.eval = [fn](const Tensor& x) {
        ad::NoGradGuard guard;
        return fn(ad::Var::constant(x)).value();
    };
    f.jacobian = [fn, dim](const Tensor& x) { return ad::batch_jacobian(fn, x, dim); };
    return f;
}

std::string scheme_name(Scheme s) { return s == Scheme::Euler ? "euler" : "rk4"; }

Scheme parse_scheme(const std::string& name) {
    if (name == "euler") return Scheme::Euler;
    if (name == "rk4") return Scheme::Rk4;
    throw ConfigError("unknown integrator '" + name + "' (expected euler or rk4)");
}

void IntegratorConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("integrator dt must be > 0");
    if (!(horizon >= dt)) throw ConfigError("integrator horizon must be >= dt");
}

std::size_t IntegratorConfig::steps() const { return static_cast<std::size_t>(std::llround(horizon / dt)); }

namespace {

Tensor axpy(const Tensor& x, double a, const Tensor& y) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * y[i];
    return out;
}

Tensor checked_eval(const VectorField& f, const Tensor& x, std::size_t step) {
    Tensor v = f.eval(x);
    if (v.shape() != x.shape()) {
        throw ShapeError("field returned " + ad::shape_string(v.shape()) + " for input " + ad::shape_string(x.shape()));
    }
    if (!v.all_finite()) throw NumericalError("non-finite velocity at step " + std::to_string(step));
    return v;
}

}  // namespace

std::vector<data::Trajectory> integrate_batch(const VectorField& field, const Tensor& x0, const IntegratorConfig& cfg) {
    cfg.validate();
    if (x0.rank() != 2 || x0.dim(1) != field.dim) {
        throw ShapeError("initial states " + ad::shape_string(x0.shape()) + " for a field of dimension " +
                         std::to_string(field.dim));
    }
    if (!x0.all_finite()) throw NumericalError("non-finite initial state");
    const std::size_t n = x0.dim(0), d = field.dim, steps = cfg.steps();
    std::vector<data::Trajectory> out(n);
    for (auto& t : out) {
        t.times.resize(steps + 1);
        t.states = Tensor(Shape{steps + 1, d});
        t.velocities = Tensor(Shape{steps + 1, d});
    }
    Tensor x = x0;
    Tensor v = checked_eval(field, x, 0);
    const double h = cfg.dt;
    for (std::size_t k = 0;; ++k) {
        for (std::size_t r = 0; r < n; ++r) {
            out[r].times[k] = static_cast<double>(k) * h;
            std::copy_n(x.raw() + r * d, d, out[r].states.raw() + k * d);
            std::copy_n(v.raw() + r * d, d, out[r].velocities.raw() + k * d);
        }
        if (k == steps) break;
        if (cfg.scheme == Scheme::Euler) {
            x = axpy(x, h, v);
        } else {
            const Tensor k2 = checked_eval(field, axpy(x, 0.5 * h, v), k + 1);
            const Tensor k3 = checked_eval(field, axpy(x, 0.5 * h, k2), k + 1);
            const Tensor k4 = checked_eval(field, axpy(x, h, k3), k + 1);
            for (std::size_t i = 0; i < x.size(); ++i) x[i] += h / 6.0 * (v[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if (!x.all_finite()) throw NumericalError("non-finite state at step " + std::to_string(k + 1));
        v = checked_eval(field, x, k + 1);
    }
    return out;
}

data::Trajectory integrate(const VectorField& field, const Tensor& x0, const IntegratorConfig& cfg) {
    return integrate_batch(field, x0.reshaped(Shape{1, x0.size()}), cfg).front();
}

namespace {

// Nearest-neighbor distances are summed in sorted order so the result does
// not depend on the order of points within either trajectory, bit for bit.
double directed(const Tensor& a, const Tensor& b) {
    const std::size_t na = a.dim(0), nb = b.dim(0), d = a.dim(1);
    std::vector<double> nearest(na);
    for (std::size_t i = 0; i < na; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < nb; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = a[i * d + k] - b[j * d + k];
                s += diff * diff;
            }
            best = std::min(best, s);
        }
        nearest[i] = std::sqrt(best);
    }
    std::sort(nearest.begin(), nearest.end());
    double total = 0.0;
    for (double v : nearest) total += v;
    return total / static_cast<double>(na);
}

}  // namespace

double dtwd(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
        throw ShapeError("dtwd of " + ad::shape_string(a.shape()) + " and " + ad::shape_string(b.shape()));
    }
    if (a.dim(0) == 0 || b.dim(0) == 0) throw ConfigError("dtwd of an empty trajectory");
    return directed(a, b) + directed(b, a);
}

double dtwd(const data::Trajectory& a, const data::Trajectory& b) { return dtwd(a.states, b.states); }

EvalSummary EvalSummary::from_scores(std::vector<double> scores) {
    EvalSummary s;
    s.scores = std::move(scores);
    if (s.scores.empty()) return s;
    const double n = static_cast<double>(s.scores.size());
    for (double v : s.scores) s.mean += v;
    s.mean /= n;
    double var = 0.0;
    for (double v : s.scores) var += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(var / n);
    return s;
}

std::string EvalSummary::text(const std::string& model, const std::string& dataset) const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-10s %-16s DTWD %.6f +/- %.6f  (n=%zu)", model.c_str(), dataset.c_str(), mean, std,
                  scores.size());
    return buf;
}

std::string EvalSummary::csv_header() { return "model,dataset,mean,std,n"; }

std::string EvalSummary::csv_row(const std::string& model, const std::string& dataset) const {
    char buf[128];
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%zu", mean, std, scores.size());
    return model + "," + dataset + buf;
}

double median_interval(const data::Trajectory& t) {
    if (t.length() < 2) throw ConfigError("trajectory needs two samples for a step size");
    std::vector<double> gaps(t.length() - 1);
    for (std::size_t i = 1; i < t.length(); ++i) gaps[i - 1] = t.times[i] - t.times[i - 1];
    const std::size_t mid = gaps.size() / 2;
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(mid), gaps.end());
    if (gaps.size() % 2 == 1) return gaps[mid];
    const double upper = gaps[mid];
    const double lower = *std::max_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

EvalSummary eval_model(const VectorField& field, const data::Dataset& dataset, Scheme scheme) {
    dataset.validate();
    std::vector<double> scores;
    for (const data::Trajectory& demo : dataset.trajectories) {
        const double dt = median_interval(demo);
        IntegratorConfig cfg{scheme, dt, std::max(demo.duration(), dt)};
        const data::Trajectory roll = integrate(field, demo.states.row(0), cfg);
        scores.push_back(dtwd(roll, demo));
    }
    return EvalSummary::from_scores(std::move(scores));
}

}  // namespace elcd::rollout
