#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "elcd/autodiff/linalg.hpp"
#include "elcd/model/elcd.hpp"
#include "elcd/verify/verify.hpp"
#include "test_util.hpp"

using namespace elcd;
using ad::Shape;
using ad::Tensor;
using rollout::VectorField;
namespace tu = elcd::testing;

namespace {

Tensor scaled(Tensor t, double s) {
    for (double& v : t.values()) v *= s;
    return t;
}
Tensor plus(Tensor a, const Tensor& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}
Tensor minus(Tensor a, const Tensor& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
}

// f(x) = -rate (x - x*)
VectorField shrink_to(const Tensor& target, double rate) {
    const std::size_t d = target.size();
    VectorField f = rollout::linear_field(scaled(Tensor::identity(d), -rate));
    f.eval = [target, rate, d](const Tensor& x) {
        Tensor v(x.shape());
        for (std::size_t r = 0; r < x.dim(0); ++r)
            for (std::size_t k = 0; k < d; ++k) v[r * d + k] = -rate * (x[r * d + k] - target[k]);
        return v;
    };
    return f;
}

VectorField model_field(const model::ElcdModel& m) {
    return rollout::from_batch_fn(m.dim(), [&m](const ad::Var& x) { return m.vector_field(x); });
}

model::ElcdModel random_elcd(std::size_t d, double alpha, std::uint64_t seed, double scale) {
    model::ElcdConfig cfg;
    cfg.dim = d;
    cfg.alpha = alpha;
    Rng rng(seed);
    model::ElcdModel m(cfg, tu::random_tensor(Shape{d}, rng, -1.0, 1.0), seed);
    ad::ParameterRefs ps;
    m.collect(ps);
    tu::perturb(ps, rng, scale);
    return m;
}

double frob(const Tensor& t) { return ad::frobenius_norm(t); }

Tensor row_block(const Tensor& t, std::size_t r, std::size_t d) {
    Tensor m(Shape{d, d});
    std::copy_n(t.raw() + r * d * d, d * d, m.raw());
    return m;
}

Tensor stable_matrix(std::size_t d, Rng& rng) {
    Tensor a = tu::random_tensor(Shape{d, d}, rng, -1.0, 1.0);
    // Entries U(-1, 1) have spectral radius about sqrt(d / 3).
    for (std::size_t i = 0; i < d; ++i) a[i * d + i] -= 1.0 + std::sqrt(static_cast<double>(d));
    return a;
}

}  // namespace

// --- exponential bound --------------------------------------------------------

TEST(EquilibriumBound, ScalarDecayIsTight) {
    const Tensor target = Tensor::vector({0.5, -1.0});
    Rng rng(1);
    const auto r = verify::equilibrium_bound_check(shrink_to(target, 0.3), target, 0.3,
                                                   tu::random_tensor(Shape{10, 2}, rng));
    EXPECT_EQ(r.samples, 10u);
    EXPECT_LE(r.max_violation, 1e-6);
    EXPECT_GE(r.max_violation, -1e-6);
    EXPECT_TRUE(r.passed(1e-6));
}

TEST(EquilibriumBound, ExpandingFieldFails) {
    const Tensor target = Tensor::vector({0.0});
    const auto r = verify::equilibrium_bound_check(rollout::linear_field(Tensor::identity(1)), target, 0.05,
                                                   Tensor::matrix(2, 1, {1.0, -0.5}), {0.01, 5.0});
    EXPECT_GT(r.max_violation, 10.0);
    EXPECT_FALSE(r.passed(1e-3));
}

TEST(EquilibriumBound, DivergenceIsReportedNotThrown) {
    VectorField f;
    f.dim = 1;
    f.eval = [](const Tensor& x) {
        Tensor v = x;
        for (double& e : v.values()) e = e * e * e;
        return v;
    };
    const auto r = verify::equilibrium_bound_check(f, Tensor::vector({0.0}), 0.05, Tensor::matrix(1, 1, {10.0}),
                                                   {0.1, 10.0});
    EXPECT_EQ(r.diverged, 1u);
    EXPECT_FALSE(r.passed(1e-3));
}

TEST(EquilibriumBound, StartAtEquilibriumIsSkipped) {
    const Tensor target = Tensor::vector({1.0, 2.0});
    const auto r = verify::equilibrium_bound_check(shrink_to(target, 1.0), target, 1.0, Tensor::matrix(1, 2, {1.0, 2.0}));
    EXPECT_EQ(r.samples, 0u);
    EXPECT_TRUE(r.passed(0.0));
}

// The model's central guarantee, over seeds, dimensions and weight scales.
TEST(EquilibriumBound, HoldsForEveryConstructedModel) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const std::size_t d = 2 + seed % 3;
        const model::ElcdModel m = random_elcd(d, 0.05 + 0.1 * static_cast<double>(seed % 2), seed, 0.5 * (seed % 3));
        Rng rng(100 + seed);
        const Tensor starts = tu::random_tensor(Shape{100, d}, rng, -3.0, 3.0);
        const auto r = verify::equilibrium_bound_check(model_field(m), m.equilibrium().value(), m.config().alpha,
                                                       starts, {0.01, 20.0});
        EXPECT_EQ(r.samples, 100u);
        EXPECT_EQ(r.diverged, 0u);
        EXPECT_LE(r.max_violation, 1e-3) << "seed " << seed;
    }
}

// --- variational flow ---------------------------------------------------------

TEST(VariationalFlow, StartsAtIdentityExactly) {
    const auto flow = verify::variational_flow(rollout::linear_field(Tensor::matrix(2, 2, {-1, 3, 0, -2})),
                                               Tensor::vector({1.0, 1.0}), 0.01, 0.1);
    EXPECT_EQ(flow.matrices.front(), Tensor::identity(2));
    EXPECT_EQ(flow.times.size(), 11u);
}

TEST(VariationalFlow, NegativeIdentityGivesExpMinusOne) {
    const auto flow =
        verify::variational_flow(rollout::linear_field(scaled(Tensor::identity(3), -1.0)), Tensor::vector({1, 2, 3}),
                                 1e-3, 1.0);
    EXPECT_LE(ad::max_abs_diff(flow.matrices.back(), scaled(Tensor::identity(3), std::exp(-1.0))), 1e-6);
}

TEST(VariationalFlow, LinearFieldsMatchMatrixExponential) {
    Rng rng(2);
    for (std::size_t d : {1u, 2u, 4u}) {
        const Tensor a = stable_matrix(d, rng);
        const auto flow = verify::variational_flow(rollout::linear_field(a), tu::random_tensor(Shape{d}, rng), 1e-3, 2.0);
        for (std::size_t k : {500u, 1000u, 2000u}) {
            const Tensor ref = tu::from_eigen(tu::expm(tu::to_eigen(a) * flow.times[k]));
            EXPECT_LE(ad::max_abs_diff(flow.matrices[k], ref), 1e-9);
        }
    }
}

// Abel-Liouville: d/dt det Y = tr(Df) det Y, checked by central differences.
TEST(VariationalFlow, LiouvilleIdentityOnNonlinearFields) {
    for (std::uint64_t seed : {3u, 4u}) {
        const model::ElcdModel m = random_elcd(3, 0.3, seed, 0.5);
        const VectorField f = model_field(m);
        Rng rng(seed);
        const double dt = 1e-3;
        const auto flow = verify::variational_flow(f, tu::random_tensor(Shape{3}, rng), dt, 2.0);
        auto det = [](const Tensor& y) { return tu::to_eigen(y).determinant(); };
        for (std::size_t k = 100; k + 1 < flow.times.size(); k += 300) {
            const double lhs = (det(flow.matrices[k + 1]) - det(flow.matrices[k - 1])) / (2 * dt);
            const Tensor j = f.jacobian_at(flow.states[k]);
            const double rhs = (j.at(0, 0) + j.at(1, 1) + j.at(2, 2)) * det(flow.matrices[k]);
            EXPECT_NEAR(lhs, rhs, 1e-4 * std::abs(rhs)) << "seed " << seed << " node " << k;
        }
    }
}

// --- converse metric ----------------------------------------------------------

TEST(ConverseMetric, ScalarDecayGivesOneHalf) {
    const auto s = verify::converse_metric_at(rollout::linear_field(Tensor::matrix(1, 1, {-1.0})), Tensor::vector({0.7}));
    EXPECT_NEAR(s.metric.at(0, 0), 0.5, 1e-6);
    EXPECT_GT(s.horizon, 13.0);  // e^{-t} <= 1e-6
    EXPECT_LT(s.horizon, 14.0);
    EXPECT_LE(s.tail_estimate, 1e-12);
}

TEST(ConverseMetric, ShrinkFieldGivesScaledIdentity) {
    const double rate = 0.5;
    const Tensor target = Tensor::vector({1.0, -2.0});
    Rng rng(5);
    const Tensor pts = tu::random_tensor(Shape{4, 2}, rng);
    for (const auto& s : verify::converse_metric(shrink_to(target, rate), pts, verify::MetricConfig::for_rate(rate))) {
        EXPECT_LE(ad::max_abs_diff(s.metric, scaled(Tensor::identity(2), 1.0 / (2 * rate))), 1e-5);
    }
}

TEST(ConverseMetric, MatchesLyapunovOracle) {
    const Tensor a = Tensor::matrix(2, 2, {-1, 1, 0, -1});
    const Tensor ref = verify::lyapunov_oracle(a, Tensor::identity(2));
    const auto s = verify::converse_metric_at(rollout::linear_field(a), Tensor::vector({0.3, 0.1}));
    EXPECT_LE(frob(minus(s.metric, ref)) / frob(ref), 1e-3);

    Rng rng(6);
    for (std::size_t d : {1u, 2u, 4u}) {
        const Tensor b = stable_matrix(d, rng);
        const Tensor m = verify::converse_metric_at(rollout::linear_field(b), tu::random_tensor(Shape{d}, rng)).metric;
        const Tensor r = verify::lyapunov_oracle(b, Tensor::identity(d));
        EXPECT_LE(frob(minus(m, r)) / frob(r), 1e-3) << "d=" << d;
    }
}

TEST(ConverseMetric, SymmetricPositiveDefinite) {
    const model::ElcdModel m = random_elcd(3, 0.5, 7, 0.3);
    Rng rng(7);
    verify::MetricConfig cfg = verify::MetricConfig::for_rate(0.5);
    cfg.dt = 1e-2;
    for (const auto& s : verify::converse_metric(model_field(m), tu::random_tensor(Shape{3, 3}, rng), cfg)) {
        EXPECT_EQ(s.metric, ad::transpose(s.metric));
        EXPECT_GT(s.min_eigenvalue, 0.0);
        EXPECT_GE(s.max_eigenvalue, s.min_eigenvalue);
    }
}

TEST(ConverseMetric, NonContractingFieldIsReported) {
    verify::MetricConfig cfg;
    cfg.t_max = 5.0;
    cfg.dt = 1e-2;
    try {
        verify::converse_metric_at(rollout::linear_field(Tensor::matrix(1, 1, {0.1})), Tensor::vector({1.0}), cfg);
        FAIL() << "expected NonContractingError";
    } catch (const verify::NonContractingError& e) {
        EXPECT_NEAR(e.psi_norm(), std::exp(0.5), 1e-6);
        EXPECT_NE(std::string(e.what()).find("possibly non-contracting"), std::string::npos);
    }
}

TEST(ConverseMetric, WeightEntersTheIntegral) {
    verify::MetricConfig cfg;
    cfg.weight = [](const Tensor& x) {
        Tensor c(Shape{x.dim(0), 1, 1});
        for (double& v : c.values()) v = 3.0;
        return c;
    };
    const auto s = verify::converse_metric_at(rollout::linear_field(Tensor::matrix(1, 1, {-1.0})), Tensor::vector({0.0}), cfg);
    EXPECT_NEAR(s.metric.at(0, 0), 1.5, 1e-5);
}

// --- residual -----------------------------------------------------------------

TEST(MetricResidual, LyapunovMetricOnLinearSystem) {
    Rng rng(8);
    for (std::size_t d : {2u, 3u}) {
        const Tensor a = stable_matrix(d, rng);
        const Tensor m = verify::lyapunov_oracle(a, Tensor::identity(d));
        const Tensor pts = tu::random_tensor(Shape{5, d}, rng);
        const Tensor res = verify::metric_residual(rollout::linear_field(a), pts, verify::constant_metric(m));
        EXPECT_LE(frob(res), 1e-8);
    }
}

TEST(MetricResidual, ZeroNetworkModelWithScaledIdentity) {
    model::ElcdConfig cfg;
    cfg.dim = 3;
    cfg.alpha = 0.2;
    cfg.sym_init = 0.0;
    const model::ElcdModel m(cfg, Tensor::vector({0.1, 0.2, 0.3}), 9);
    Rng rng(9);
    const Tensor pts = tu::random_tensor(Shape{6, 3}, rng);
    const Tensor res = verify::metric_residual(model_field(m), pts,
                                               verify::constant_metric(scaled(Tensor::identity(3), 1.0 / (2 * 0.2))));
    EXPECT_LE(frob(res), 1e-6);
}

TEST(MetricResidual, ConverseMetricOnLinearFields) {
    Rng rng(10);
    const Tensor a = stable_matrix(2, rng);
    const VectorField f = rollout::linear_field(a);
    const Tensor pts = tu::random_tensor(Shape{5, 2}, rng);
    const Tensor res = verify::metric_residual(f, pts, verify::converse_metric_fn(f, {}));
    for (std::size_t r = 0; r < 5; ++r) EXPECT_LE(frob(row_block(res, r, 2)), 1e-2);
}

TEST(MetricResidual, ConverseMetricOnRandomModel) {
    const model::ElcdModel m = random_elcd(2, 0.5, 11, 0.3);
    const VectorField f = model_field(m);
    Rng rng(11);
    const Tensor pts = tu::random_tensor(Shape{10, 2}, rng);
    const auto start = std::chrono::steady_clock::now();
    const Tensor res = verify::metric_residual(f, pts, verify::converse_metric_fn(f, verify::MetricConfig::for_rate(0.5)));
    for (std::size_t r = 0; r < 10; ++r) EXPECT_LE(frob(row_block(res, r, 2)), 1e-2) << "sample " << r;
    std::cout << "converse metric residual at 10 points: "
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s\n";
}

// --- contraction inequality ---------------------------------------------------

TEST(ContractionCheck, ScalarMarginExamples) {
    const VectorField f = rollout::linear_field(Tensor::matrix(1, 1, {-1.0}));
    const auto metric = verify::constant_metric(Tensor::matrix(1, 1, {0.5}));
    const Tensor pts = Tensor::matrix(3, 1, {-1.0, 0.0, 2.0});
    const auto ok = verify::contraction_check(f, metric, 0.99, pts);
    EXPECT_TRUE(ok.passed);
    EXPECT_NEAR(ok.worst_lambda, -0.01, 1e-12);
    EXPECT_NEAR(ok.achieved_rate, 1.0, 1e-12);
    const auto bad = verify::contraction_check(f, metric, 1.01, pts);
    EXPECT_FALSE(bad.passed);
    EXPECT_NEAR(bad.worst_lambda, 0.01, 1e-12);
}

TEST(ContractionCheck, ZeroNetworkModelIsOnTheBoundary) {
    model::ElcdConfig cfg;
    cfg.dim = 4;
    cfg.sym_init = 0.0;
    const model::ElcdModel m(cfg, Tensor::vector({0, 1, 0, -1}), 12);
    Rng rng(12);
    const auto r = verify::contraction_check(model_field(m), verify::constant_metric(Tensor::identity(4)), cfg.alpha,
                                             tu::random_tensor(Shape{8, 4}, rng), 1e-10);
    EXPECT_TRUE(r.passed);
    EXPECT_LE(r.worst_lambda, 1e-10);
    EXPECT_NEAR(r.achieved_rate, cfg.alpha, 1e-10);
}

TEST(ContractionCheck, NonPositiveMetricFails) {
    const auto r = verify::contraction_check(rollout::linear_field(Tensor::matrix(1, 1, {-1.0})),
                                             verify::constant_metric(Tensor::matrix(1, 1, {-0.5})), 0.1,
                                             Tensor::matrix(1, 1, {0.0}));
    EXPECT_FALSE(r.passed);
    EXPECT_FALSE(r.entries[0].metric_pd);
}

// A data-space metric built from a latent one through a linear change of
// coordinates certifies the pulled-back field at the same rate.
TEST(ContractionCheck, LatentMetricTransportsToDataSpace) {
    const Tensor p = Tensor::matrix(2, 2, {1, 0, 0, 4});
    const Tensor a = Tensor::matrix(2, 2, {-1, 4, 0, -1});
    const Tensor latent_a = ad::matmul(ad::matmul(p, a), ad::inverse(p));
    EXPECT_LE(ad::max_abs_diff(latent_a, Tensor::matrix(2, 2, {-1, 1, 0, -1})), 1e-15);
    const Tensor latent_m = Tensor::identity(2);
    const Tensor data_m = ad::matmul(ad::matmul(ad::transpose(p), latent_m), p);
    Rng rng(13);
    const Tensor xs = tu::random_tensor(Shape{10, 2}, rng);
    const Tensor zs = ad::transpose(ad::matmul(p, ad::transpose(xs)));
    for (double c : {0.2, 0.4, 0.49}) {
        const auto lat = verify::contraction_check(rollout::linear_field(latent_a), verify::constant_metric(latent_m), c, zs);
        const auto dat = verify::contraction_check(rollout::linear_field(a), verify::constant_metric(data_m), c, xs);
        EXPECT_TRUE(lat.passed);
        EXPECT_TRUE(dat.passed);
        EXPECT_NEAR(lat.achieved_rate, dat.achieved_rate, 1e-6);
    }
    EXPECT_NEAR(verify::contraction_check(rollout::linear_field(a), verify::constant_metric(data_m), 0.1, xs).achieved_rate,
                0.5, 1e-9);
    EXPECT_FALSE(verify::contraction_check(rollout::linear_field(a), verify::constant_metric(data_m), 0.51, xs).passed);
}

// --- Lyapunov oracle ----------------------------------------------------------

TEST(LyapunovOracle, NegativeIdentity) {
    const Tensor m = verify::lyapunov_oracle(scaled(Tensor::identity(3), -1.0), Tensor::identity(3));
    EXPECT_LE(ad::max_abs_diff(m, scaled(Tensor::identity(3), 0.5)), 1e-15);
}

TEST(LyapunovOracle, ResidualAndDefiniteness) {
    Rng rng(14);
    auto check = [](const Tensor& a) {
        const Tensor m = verify::lyapunov_oracle(a, Tensor::identity(a.dim(0)));
        const Tensor res = plus(plus(ad::matmul(m, a), ad::matmul(ad::transpose(a), m)), Tensor::identity(a.dim(0)));
        EXPECT_LE(frob(res), 1e-10);
        EXPECT_GT(tu::to_eigen(m).selfadjointView<Eigen::Lower>().eigenvalues().minCoeff(), 0.0);
    };
    check(Tensor::matrix(2, 2, {-1, 1, 0, -1}));
    for (std::size_t d : {1u, 2u, 5u, 8u, 16u}) check(stable_matrix(d, rng));
}

TEST(LyapunovOracle, RejectsNonHurwitz) {
    EXPECT_THROW(verify::lyapunov_oracle(Tensor::matrix(2, 2, {-1, 0, 0, 0.1}), Tensor::identity(2)), NumericalError);
    EXPECT_THROW(verify::lyapunov_oracle(Tensor::matrix(2, 2, {0, 1, -1, 0}), Tensor::identity(2)), NumericalError);
}

// --- report -------------------------------------------------------------------

TEST(VerifyReport, ReproducibleAndConsistent) {
    const model::ElcdModel m = random_elcd(2, 0.5, 15, 0.2);
    const VectorField f = model_field(m);
    Rng rng(15);
    const Tensor data = tu::random_tensor(Shape{50, 2}, rng);
    verify::VerifyConfig cfg;
    cfg.rate = 0.5;
    cfg.samples = 4;
    cfg.rollouts = 10;
    cfg.seed = 3;
    cfg.metric = verify::MetricConfig::for_rate(0.5);
    cfg.metric.dt = 1e-2;
    const auto a = verify::verify_field(f, m.equilibrium().value(), data, cfg);
    const auto b = verify::verify_field(f, m.equilibrium().value(), data, cfg);
    EXPECT_EQ(a.text(), b.text());
    EXPECT_EQ(a.csv(), b.csv());
    EXPECT_TRUE(a.passed()) << a.text();
    EXPECT_GE(a.a0, a.a1);
    EXPECT_GT(a.a1, 0.0);
    ASSERT_EQ(a.residual_norms.size(), 4u);
    ASSERT_EQ(a.margins.size(), 4u);
    for (const auto& p : a.points)
        for (std::size_t k = 0; k < 2; ++k) {
            EXPECT_GE(p[k], a.box_low[k]);
            EXPECT_LE(p[k], a.box_high[k]);
        }
}

TEST(VerifyReport, SampleBoxInflation) {
    const auto [lo, hi] = verify::sample_box(Tensor::matrix(2, 2, {0, -1, 2, 1}), 0.5);
    EXPECT_EQ(lo, Tensor::vector({-1.0, -2.0}));
    EXPECT_EQ(hi, Tensor::vector({3.0, 2.0}));
}

TEST(VerifyReport, AntiContractingFieldFailsWithoutThrowing) {
    const VectorField f = rollout::linear_field(Tensor::matrix(2, 2, {0.1, 0, 0, -1}));
    verify::VerifyConfig cfg;
    cfg.samples = 3;
    cfg.rollouts = 4;
    cfg.bound.horizon = 5.0;
    cfg.metric = verify::MetricConfig::for_rate(1.0);
    cfg.metric.dt = 1e-2;
    const auto rep = verify::verify_field(f, Tensor::vector({0, 0}), Tensor::matrix(2, 2, {-1, -1, 1, 1}), cfg);
    EXPECT_FALSE(rep.passed());
    ASSERT_EQ(rep.checks.size(), 2u);
    EXPECT_FALSE(rep.checks[0].passed);  // trajectories grow
    EXPECT_EQ(rep.checks[1].name, "converse metric converges");
    EXPECT_FALSE(rep.checks[1].passed);
    EXPECT_NE(rep.text().find("FAIL"), std::string::npos);
}
