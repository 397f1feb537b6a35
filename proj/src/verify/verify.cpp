#include "elcd/verify/verify.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace elcd::verify {

using ad::Shape;
using ad::Tensor;
using Eigen::MatrixXd;

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

MatrixXd block(const Tensor& t, std::size_t r, std::size_t d) {
    MatrixXd m(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) m(i, j) = t[r * d * d + i * d + j];
    return m;
}

void store(Tensor& t, std::size_t r, const MatrixXd& m) {
    const std::size_t d = static_cast<std::size_t>(m.rows());
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) t[r * d * d + i * d + j] = m(i, j);
}

Tensor to_tensor(const MatrixXd& m) {
    Tensor t(Shape{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) t[i * m.cols() + j] = m(i, j);
    return t;
}

void check_rows(const rollout::VectorField& field, const Tensor& points) {
    if (points.rank() != 2 || points.dim(1) != field.dim) {
        throw ShapeError("points " + ad::shape_string(points.shape()) + " for a field of dimension " +
                         std::to_string(field.dim));
    }
    if (!field.jacobian) throw ConfigError("verification needs the field Jacobian");
}

// (N, d, d) batched product a * b, optionally transposing a.
Tensor bmm(const Tensor& a, const Tensor& b, std::size_t n, std::size_t d) {
    Tensor out(Shape{n, d, d});
    for (std::size_t r = 0; r < n; ++r) {
        const double* pa = a.raw() + r * d * d;
        const double* pb = b.raw() + r * d * d;
        double* po = out.raw() + r * d * d;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t k = 0; k < d; ++k) {
                const double aik = pa[i * d + k];
                for (std::size_t j = 0; j < d; ++j) po[i * d + j] += aik * pb[k * d + j];
            }
    }
    return out;
}

Tensor axpy(const Tensor& x, double a, const Tensor& y) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * y[i];
    return out;
}

Tensor identity_batch(std::size_t n, std::size_t d) {
    Tensor t(Shape{n, d, d});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < d; ++i) t[r * d * d + i * d + i] = 1.0;
    return t;
}

// Joint RK4 stepper for rows x (N, d) and Y (N, d, d).
struct VariationalStepper {
    const rollout::VectorField& field;
    std::size_t n, d;

    void step(Tensor& x, Tensor& y, double h) const {
        auto deriv = [&](const Tensor& xs, const Tensor& ys, Tensor& dx, Tensor& dy) {
            dx = field.eval(xs);
            dy = bmm(field.jacobian(xs), ys, n, d);
        };
        Tensor k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y;
        deriv(x, y, k1x, k1y);
        deriv(axpy(x, 0.5 * h, k1x), axpy(y, 0.5 * h, k1y), k2x, k2y);
        deriv(axpy(x, 0.5 * h, k2x), axpy(y, 0.5 * h, k2y), k3x, k3y);
        deriv(axpy(x, h, k3x), axpy(y, h, k3y), k4x, k4y);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += h / 6.0 * (k1x[i] + 2 * k2x[i] + 2 * k3x[i] + k4x[i]);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += h / 6.0 * (k1y[i] + 2 * k2y[i] + 2 * k3y[i] + k4y[i]);
    }
};

double frob_row(const Tensor& t, std::size_t r, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d * d; ++i) s += t[r * d * d + i] * t[r * d * d + i];
    return std::sqrt(s);
}

}  // namespace

NonContractingError::NonContractingError(double horizon, double psi_norm)
    : NumericalError("possibly non-contracting: variational flow norm " + fmt("%.3e", psi_norm) +
                     " has not decayed by t = " + fmt("%g", horizon)),
      psi_norm_(psi_norm) {}

BoundResult equilibrium_bound_check(const rollout::VectorField& field, const Tensor& target, double rate,
                                    const Tensor& starts, const BoundConfig& cfg) {
    if (starts.rank() != 2 || starts.dim(1) != field.dim || target.size() != field.dim) {
        throw ShapeError("bound check: starts " + ad::shape_string(starts.shape()) + ", equilibrium " +
                         ad::shape_string(target.shape()));
    }
    const std::size_t d = field.dim;
    BoundResult res;
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < starts.dim(0); ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += std::pow(starts[r * d + k] - target[k], 2);
        if (s > 0.0) keep.push_back(r);
    }
    res.samples = keep.size();
    if (keep.empty()) return res;
    const rollout::IntegratorConfig icfg{rollout::Scheme::Rk4, cfg.dt, cfg.horizon};

    auto score = [&](const data::Trajectory& traj) {
        auto dist = [&](std::size_t k) {
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) s += std::pow(traj.states.at(k, i) - target[i], 2);
            return std::sqrt(s);
        };
        const double d0 = dist(0);
        for (std::size_t k = 1; k < traj.length(); ++k) {
            const double v = dist(k) / (std::exp(-rate * traj.times[k]) * d0) - 1.0;
            res.max_violation = std::max(res.max_violation, v);
        }
    };

    Tensor batch(Shape{keep.size(), d});
    for (std::size_t i = 0; i < keep.size(); ++i) std::copy_n(starts.raw() + keep[i] * d, d, batch.raw() + i * d);
    try {
        for (const data::Trajectory& t : rollout::integrate_batch(field, batch, icfg)) score(t);
        return res;
    } catch (const NumericalError&) {
        // Some row diverged; redo row by row to count which.
    }
    res.max_violation = 0.0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        try {
            score(rollout::integrate(field, batch.row(i), icfg));
        } catch (const NumericalError&) {
            ++res.diverged;
            res.max_violation = std::numeric_limits<double>::infinity();
        }
    }
    return res;
}

VariationalFlow variational_flow(const rollout::VectorField& field, const Tensor& x, double dt, double horizon) {
    rollout::IntegratorConfig{rollout::Scheme::Rk4, dt, horizon}.validate();
    const std::size_t d = field.dim;
    Tensor xs = x.reshaped(Shape{1, d});
    check_rows(field, xs);
    if (!xs.all_finite()) throw NumericalError("non-finite start point");
    Tensor y = identity_batch(1, d);
    const VariationalStepper stepper{field, 1, d};
    const std::size_t steps = static_cast<std::size_t>(std::llround(horizon / dt));
    VariationalFlow flow;
    for (std::size_t k = 0;; ++k) {
        flow.times.push_back(static_cast<double>(k) * dt);
        flow.states.push_back(xs.reshaped(Shape{d}));
        flow.matrices.push_back(y.reshaped(Shape{d, d}));
        if (k == steps) break;
        stepper.step(xs, y, dt);
        if (!xs.all_finite() || !y.all_finite()) {
            throw NumericalError("non-finite variational flow at step " + std::to_string(k + 1));
        }
    }
    return flow;
}

MetricConfig MetricConfig::for_rate(double rate) {
    MetricConfig cfg;
    cfg.t_max = 50.0 / rate;
    return cfg;
}

std::vector<MetricSample> converse_metric(const rollout::VectorField& field, const Tensor& points,
                                          const MetricConfig& cfg) {
    check_rows(field, points);
    if (!(cfg.dt > 0.0) || !(cfg.t_max > cfg.dt) || !(cfg.tail_tol > 0.0)) throw ConfigError("bad metric config");
    if (!points.all_finite()) throw NumericalError("non-finite metric sample point");
    const std::size_t n = points.dim(0), d = field.dim;
    Tensor x = points;
    Tensor y = identity_batch(n, d);
    const VariationalStepper stepper{field, n, d};

    auto integrand = [&](const Tensor& xs, const Tensor& ys) {
        // Y^T C(x) Y per row.
        Tensor yt(Shape{n, d, d});
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) yt[r * d * d + i * d + j] = ys[r * d * d + j * d + i];
        const Tensor c = cfg.weight ? cfg.weight(xs) : identity_batch(n, d);
        return bmm(yt, bmm(c, ys, n, d), n, d);
    };

    std::vector<MetricSample> out(n);
    std::vector<bool> done(n, false);
    std::vector<double> prev_norm(n);
    Tensor acc(Shape{n, d, d});
    Tensor g = integrand(x, y);
    for (std::size_t r = 0; r < n; ++r) prev_norm[r] = frob_row(y, r, d);
    const std::size_t steps = static_cast<std::size_t>(std::llround(cfg.t_max / cfg.dt));
    std::size_t remaining = n;
    for (std::size_t k = 1; k <= steps && remaining > 0; ++k) {
        stepper.step(x, y, cfg.dt);
        if (!y.all_finite()) throw NumericalError("non-finite variational flow at step " + std::to_string(k));
        const Tensor g_next = integrand(x, y);
        for (std::size_t r = 0; r < n; ++r) {
            if (done[r]) continue;
            for (std::size_t i = 0; i < d * d; ++i) acc[r * d * d + i] += 0.5 * cfg.dt * (g[r * d * d + i] + g_next[r * d * d + i]);
            const double norm = frob_row(y, r, d);
            if (norm <= cfg.tail_tol) {
                done[r] = true;
                --remaining;
                out[r].horizon = static_cast<double>(k) * cfg.dt;
                const double decay = (std::log(prev_norm[r]) - std::log(norm)) / cfg.dt;
                out[r].tail_estimate = decay > 0.0 ? frob_row(g_next, r, d) / (2.0 * decay)
                                                   : std::numeric_limits<double>::infinity();
            }
            prev_norm[r] = norm;
        }
        g = g_next;
    }
    for (std::size_t r = 0; r < n; ++r) {
        if (!done[r]) throw NonContractingError(cfg.t_max, frob_row(y, r, d));
        MatrixXd m = block(acc, r, d);
        m = 0.5 * (m + m.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
        out[r].point = points.row(r);
        out[r].metric = to_tensor(m);
        out[r].min_eigenvalue = es.eigenvalues().minCoeff();
        out[r].max_eigenvalue = es.eigenvalues().maxCoeff();
    }
    return out;
}

MetricSample converse_metric_at(const rollout::VectorField& field, const Tensor& point, const MetricConfig& cfg) {
    return converse_metric(field, point.reshaped(Shape{1, point.size()}), cfg).front();
}

MetricFn constant_metric(const Tensor& m) {
    return [m](const Tensor& x) {
        const std::size_t n = x.dim(0), d = m.dim(0);
        Tensor out(Shape{n, d, d});
        for (std::size_t r = 0; r < n; ++r) std::copy_n(m.raw(), d * d, out.raw() + r * d * d);
        return out;
    };
}

MetricFn converse_metric_fn(const rollout::VectorField& field, const MetricConfig& cfg) {
    return [field, cfg](const Tensor& x) {
        const std::size_t n = x.dim(0), d = field.dim;
        Tensor out(Shape{n, d, d});
        const auto samples = converse_metric(field, x, cfg);
        for (std::size_t r = 0; r < n; ++r) std::copy_n(samples[r].metric.raw(), d * d, out.raw() + r * d * d);
        return out;
    };
}

namespace {

struct LocalTerms {
    Tensor metric, metric_dot, jac;  // (N, d, d) each
};

LocalTerms local_terms(const rollout::VectorField& field, const MetricFn& metric, const Tensor& points, double h) {
    check_rows(field, points);
    if (!(h > 0.0)) throw ConfigError("flow step must be > 0");
    const std::size_t n = points.dim(0), d = field.dim;
    const auto flowed = rollout::integrate_batch(field, points, {rollout::Scheme::Rk4, h, h});
    Tensor both(Shape{2 * n, d});
    for (std::size_t r = 0; r < n; ++r) {
        std::copy_n(points.raw() + r * d, d, both.raw() + r * d);
        std::copy_n(flowed[r].states.raw() + d, d, both.raw() + (n + r) * d);
    }
    const Tensor ms = metric(both);
    if (ms.shape() != Shape{2 * n, d, d}) throw ShapeError("metric returned " + ad::shape_string(ms.shape()));
    LocalTerms t{Tensor(Shape{n, d, d}), Tensor(Shape{n, d, d}), field.jacobian(points)};
    for (std::size_t i = 0; i < n * d * d; ++i) {
        t.metric[i] = ms[i];
        t.metric_dot[i] = (ms[n * d * d + i] - ms[i]) / h;
    }
    return t;
}

// Symmetric part of M Df + Df^T M + Mdot for row r.
MatrixXd lie_form(const LocalTerms& t, std::size_t r, std::size_t d) {
    const MatrixXd m = block(t.metric, r, d), j = block(t.jac, r, d), md = block(t.metric_dot, r, d);
    const MatrixXd s = m * j + j.transpose() * m + md;
    return 0.5 * (s + s.transpose());
}

ContractionResult contraction_from_terms(const LocalTerms& t, const Tensor& points, double rate, double tolerance) {
    const std::size_t n = points.dim(0), d = points.dim(1);
    ContractionResult res;
    res.rate = rate;
    res.tolerance = tolerance;
    res.passed = true;
    res.worst_lambda = -std::numeric_limits<double>::infinity();
    res.achieved_rate = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < n; ++r) {
        ContractionEntry e;
        e.point = points.row(r);
        MatrixXd m = block(t.metric, r, d);
        m = 0.5 * (m + m.transpose()).eval();
        const MatrixXd s = lie_form(t, r, d);
        e.lambda_max = Eigen::SelfAdjointEigenSolver<MatrixXd>(s + 2.0 * rate * m, Eigen::EigenvaluesOnly)
                           .eigenvalues()
                           .maxCoeff();
        e.metric_pd = Eigen::SelfAdjointEigenSolver<MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() > 0.0;
        if (e.metric_pd) {
            Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(s, m, Eigen::EigenvaluesOnly);
            e.achieved_rate = -0.5 * ges.eigenvalues().maxCoeff();
        } else {
            e.achieved_rate = -std::numeric_limits<double>::infinity();
        }
        e.passed = e.metric_pd && e.lambda_max <= tolerance;
        res.passed = res.passed && e.passed;
        res.worst_lambda = std::max(res.worst_lambda, e.lambda_max);
        res.achieved_rate = std::min(res.achieved_rate, e.achieved_rate);
        res.entries.push_back(std::move(e));
    }
    return res;
}

Tensor residual_from_terms(const LocalTerms& t, std::size_t n, std::size_t d, const Tensor& points,
                           const WeightFn& weight) {
    const Tensor c = weight ? weight(points) : identity_batch(n, d);
    Tensor out(Shape{n, d, d});
    for (std::size_t r = 0; r < n; ++r) {
        const MatrixXd m = block(t.metric, r, d), j = block(t.jac, r, d), md = block(t.metric_dot, r, d);
        store(out, r, m * j + j.transpose() * m + md + block(c, r, d));
    }
    return out;
}

}  // namespace

Tensor metric_derivative(const rollout::VectorField& field, const MetricFn& metric, const Tensor& points, double h) {
    return local_terms(field, metric, points, h).metric_dot;
}

Tensor metric_residual(const rollout::VectorField& field, const Tensor& points, const MetricFn& metric, double h,
                       const WeightFn& weight) {
    const LocalTerms t = local_terms(field, metric, points, h);
    return residual_from_terms(t, points.dim(0), field.dim, points, weight);
}

ContractionResult contraction_check(const rollout::VectorField& field, const MetricFn& metric, double rate,
                                    const Tensor& points, double tolerance, double h) {
    return contraction_from_terms(local_terms(field, metric, points, h), points, rate, tolerance);
}

Tensor lyapunov_oracle(const Tensor& a, const Tensor& c) {
    if (a.rank() != 2 || a.dim(0) != a.dim(1) || c.shape() != a.shape()) {
        throw ShapeError("lyapunov: A " + ad::shape_string(a.shape()) + ", C " + ad::shape_string(c.shape()));
    }
    const auto d = static_cast<Eigen::Index>(a.dim(0));
    MatrixXd ea(d, d), ec(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
            ea(i, j) = a[i * d + j];
            ec(i, j) = c[i * d + j];
        }
    const double max_re = Eigen::EigenSolver<MatrixXd>(ea, false).eigenvalues().real().maxCoeff();
    if (!(max_re < 0.0)) throw NumericalError("matrix is not Hurwitz (max real eigenvalue " + fmt("%.6g", max_re) + ")");
    // Column-major vec: vec(M A) = (A^T kron I) vec(M), vec(A^T M) = (I kron A^T) vec(M).
    const MatrixXd id = MatrixXd::Identity(d, d);
    MatrixXd k = MatrixXd::Zero(d * d, d * d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
            k.block(i * d, j * d, d, d) += ea(j, i) * id;  // A^T kron I
            if (i == j) k.block(i * d, j * d, d, d) += ea.transpose();
        }
    const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(ec.data(), d * d);
    const Eigen::VectorXd v = k.fullPivLu().solve(rhs);
    MatrixXd m = Eigen::Map<const MatrixXd>(v.data(), d, d);
    m = 0.5 * (m + m.transpose()).eval();
    return to_tensor(m);
}

std::pair<Tensor, Tensor> sample_box(const Tensor& data, double inflation) {
    if (data.rank() != 2 || data.dim(0) == 0) throw ShapeError("sample box needs non-empty rows");
    const std::size_t n = data.dim(0), d = data.dim(1);
    Tensor lo(Shape{d}), hi(Shape{d});
    for (std::size_t k = 0; k < d; ++k) {
        lo[k] = hi[k] = data[k];
        for (std::size_t r = 1; r < n; ++r) {
            lo[k] = std::min(lo[k], data[r * d + k]);
            hi[k] = std::max(hi[k], data[r * d + k]);
        }
        const double pad = inflation * (hi[k] - lo[k]);
        lo[k] -= pad;
        hi[k] += pad;
    }
    return {lo, hi};
}

Tensor sample_points(const Tensor& low, const Tensor& high, std::size_t n, Rng& rng) {
    const std::size_t d = low.size();
    Tensor out(Shape{n, d});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = 0; k < d; ++k) out[r * d + k] = uniform(rng, low[k], high[k]);
    return out;
}

VerifyReport verify_field(const rollout::VectorField& field, const Tensor& target, const Tensor& data,
                          const VerifyConfig& cfg, const std::optional<LatentView>& latent) {
    VerifyReport rep;
    std::tie(rep.box_low, rep.box_high) = sample_box(data, cfg.inflation);
    Rng point_rng(derive_seed(cfg.seed, 0));
    Rng start_rng(derive_seed(cfg.seed, 1));
    const Tensor points = sample_points(rep.box_low, rep.box_high, cfg.samples, point_rng);
    const Tensor starts = sample_points(rep.box_low, rep.box_high, cfg.rollouts, start_rng);
    for (std::size_t r = 0; r < points.dim(0); ++r) rep.points.push_back(points.row(r));

    if (latent) {
        rep.bound = equilibrium_bound_check(latent->field, latent->target, cfg.rate, latent->encode(starts), cfg.bound);
    } else {
        rep.bound = equilibrium_bound_check(field, target, cfg.rate, starts, cfg.bound);
    }
    rep.checks.push_back({"equilibrium bound", rep.bound.max_violation, cfg.bound_tolerance,
                          rep.bound.passed(cfg.bound_tolerance)});

    if (!cfg.compute_metric || cfg.samples == 0) return rep;
    try {
        rep.metrics = converse_metric(field, points, cfg.metric);
    } catch (const NonContractingError& e) {
        // No finite metric: the remaining checks cannot hold.
        rep.checks.push_back({"converse metric converges", e.psi_norm(), cfg.metric.tail_tol, false});
        return rep;
    }
    rep.a0 = -std::numeric_limits<double>::infinity();
    rep.a1 = std::numeric_limits<double>::infinity();
    for (const MetricSample& s : rep.metrics) {
        rep.a0 = std::max(rep.a0, s.max_eigenvalue);
        rep.a1 = std::min(rep.a1, s.min_eigenvalue);
    }
    rep.checks.push_back({"metric positive definite (a1)", rep.a1, 0.0, rep.a1 > 0.0 && rep.a0 >= rep.a1});

    const LocalTerms terms = local_terms(field, converse_metric_fn(field, cfg.metric), points, kFlowStep);
    const std::size_t n = points.dim(0), d = field.dim;
    const Tensor res = residual_from_terms(terms, n, d, points, cfg.metric.weight);
    double worst = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        rep.residual_norms.push_back(frob_row(res, r, d));
        worst = std::max(worst, rep.residual_norms.back());
    }
    rep.checks.push_back({"metric residual", worst, cfg.residual_tolerance, worst <= cfg.residual_tolerance});

    const double c = cfg.contraction_rate < 0.0 ? 1e-3 : cfg.contraction_rate;
    const ContractionResult cr = contraction_from_terms(terms, points, c, cfg.contraction_tolerance);
    for (const ContractionEntry& e : cr.entries) rep.margins.push_back(e.achieved_rate);
    rep.checks.push_back({"contraction at rate " + fmt("%g", c), cr.worst_lambda, cfg.contraction_tolerance, cr.passed});
    return rep;
}

bool VerifyReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::string VerifyReport::text() const {
    std::ostringstream os;
    os << "samples: " << points.size() << " points in box";
    for (std::size_t k = 0; k < box_low.size(); ++k) os << (k ? " x " : " ") << "[" << box_low[k] << ", " << box_high[k] << "]";
    os << "\n";
    os << "rollouts: " << bound.samples << " (diverged " << bound.diverged << ")\n";
    if (!metrics.empty()) os << "metric eigenvalue range over samples: a1 = " << a1 << ", a0 = " << a0 << "\n";
    for (const Check& c : checks) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "%-4s %-32s value %.6e  tol %.1e", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                      c.value, c.tolerance);
        os << buf << "\n";
    }
    os << "checks are sampled; no global certificate is implied\n";
    return os.str();
}

std::string VerifyReport::csv() const {
    std::ostringstream os;
    os << "sample";
    const std::size_t d = box_low.size();
    for (std::size_t k = 0; k < d; ++k) os << ",x" << k;
    os << ",residual_norm,achieved_rate,metric_min_eig,metric_max_eig\n";
    char buf[64];
    for (std::size_t r = 0; r < points.size(); ++r) {
        os << r;
        for (std::size_t k = 0; k < d; ++k) {
            std::snprintf(buf, sizeof buf, ",%.17g", points[r][k]);
            os << buf;
        }
        auto put = [&](const std::vector<double>& v) {
            std::snprintf(buf, sizeof buf, ",%.17g", r < v.size() ? v[r] : NAN);
            os << buf;
        };
        put(residual_norms);
        put(margins);
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g", r < metrics.size() ? metrics[r].min_eigenvalue : NAN,
                      r < metrics.size() ? metrics[r].max_eigenvalue : NAN);
        os << buf << "\n";
    }
    return os.str();
}

}  // namespace elcd::verify
