#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "elcd/autodiff/gradcheck.hpp"
#include "elcd/autodiff/linalg.hpp"
#include "elcd/errors.hpp"
#include "elcd/flows/diffeo.hpp"
#include "test_util.hpp"

using namespace elcd;
using namespace elcd::flows;
using ad::Shape;
using ad::Tensor;
using ad::Var;
using elcd::testing::perturb;
using elcd::testing::random_tensor;

namespace {

std::vector<double> random_raw(const SplineShape& shape, Rng& rng, double scale) {
    std::vector<double> raw(shape.raw_size());
    for (double& v : raw) v = uniform(rng, -scale, scale);
    return raw;
}

// Textbook rational-quadratic bin formula.
double reference_spline(double x, const SplineKnots& kn) {
    if (x <= kn.x.front() || x >= kn.x.back()) return x;
    std::size_t k = 0;
    while (x >= kn.x[k + 1]) ++k;
    const double w = kn.x[k + 1] - kn.x[k], h = kn.y[k + 1] - kn.y[k];
    const double s = h / w, xi = (x - kn.x[k]) / w;
    return kn.y[k] + h * (s * xi * xi + kn.d[k] * xi * (1 - xi)) /
                         (s + (kn.d[k + 1] + kn.d[k] - 2 * s) * xi * (1 - xi));
}

DiffeoStack random_stack(std::size_t d, std::uint64_t seed, double scale = 0.1) {
    DiffeoStack stack(DiffeoConfig{.dim = d, .seed = seed});
    ad::ParameterRefs params;
    stack.collect(params);
    Rng rng(seed + 100);
    perturb(params, rng, scale);
    return stack;
}

Tensor fd_jacobian(const DiffeoStack& stack, const Tensor& x, double step = 1e-6) {
    const std::size_t d = x.size();
    Tensor j(Shape{d, d});
    for (std::size_t c = 0; c < d; ++c) {
        Tensor xp = x.reshaped({1, d}), xm = x.reshaped({1, d});
        xp[c] += step;
        xm[c] -= step;
        const Tensor fp = stack.forward(xp), fm = stack.forward(xm);
        for (std::size_t r = 0; r < d; ++r) j.at(r, c) = (fp[r] - fm[r]) / (2 * step);
    }
    return j;
}

}  // namespace

TEST(Spline, IdentityInitialization) {
    const SplineShape shape;
    const SplineKnots kn = spline_knots(std::vector<double>(shape.raw_size(), 0.0), shape);
    const auto [y, dy] = spline_forward(0.7, kn);
    EXPECT_EQ(y, 0.7);
    EXPECT_NEAR(dy, 1.0, 1e-12);
    EXPECT_EQ(kn.x.front(), -10.0);
    EXPECT_EQ(kn.x.back(), 10.0);
    for (double d : kn.d) EXPECT_EQ(d, 1.0);
}

TEST(Spline, LinearTails) {
    Rng rng(2);
    const SplineShape shape;
    for (int i = 0; i < 100; ++i) {
        const SplineKnots kn = spline_knots(random_raw(shape, rng, 3.0), shape);
        const double x = (i % 2 ? 1 : -1) * uniform(rng, 10.0, 50.0);
        const auto [y, dy] = spline_forward(x, kn);
        EXPECT_EQ(y, x);
        EXPECT_EQ(dy, 1.0);
        EXPECT_EQ(spline_inverse(x, kn), x);
    }
}

TEST(Spline, MatchesTextbookFormula) {
    Rng rng(3);
    const SplineShape shape;
    for (int i = 0; i < 1000; ++i) {
        const SplineKnots kn = spline_knots(random_raw(shape, rng, 3.0), shape);
        const double x = uniform(rng, -10.0, 10.0);
        EXPECT_NEAR(spline_forward(x, kn).first, reference_spline(x, kn), 1e-12);
    }
}

TEST(Spline, Roundtrip) {
    Rng rng(4);
    const SplineShape shape;
    for (int i = 0; i < 1000; ++i) {
        const SplineKnots kn = spline_knots(random_raw(shape, rng, 3.0), shape);
        const double x = uniform(rng, -12.0, 12.0);
        EXPECT_LE(std::abs(spline_inverse(spline_forward(x, kn).first, kn) - x), 1e-10);
        const double y = uniform(rng, -12.0, 12.0);
        EXPECT_LE(std::abs(spline_forward(spline_inverse(y, kn), kn).first - y), 1e-10);
    }
}

TEST(Spline, MonotoneWithPositiveSlope) {
    Rng rng(5);
    const SplineShape shape;
    for (int j = 0; j < 10; ++j) {
        const SplineKnots kn = spline_knots(random_raw(shape, rng, 4.0), shape);
        double prev = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < 1000; ++i) {
            const double x = -10.0 + 20.0 * (i + 0.5) / 1000.0;
            const auto [y, dy] = spline_forward(x, kn);
            EXPECT_GE(dy, 1e-12);
            EXPECT_GT(y, prev);
            prev = y;
        }
    }
}

TEST(Spline, SlopeMatchesFiniteDifferenceAndIsContinuousAtBounds) {
    Rng rng(6);
    const SplineShape shape;
    for (int i = 0; i < 200; ++i) {
        const SplineKnots kn = spline_knots(random_raw(shape, rng, 2.0), shape);
        const double x = uniform(rng, -9.9, 9.9);
        const double fd = (spline_forward(x + 1e-6, kn).first - spline_forward(x - 1e-6, kn).first) / 2e-6;
        EXPECT_NEAR(spline_forward(x, kn).second, fd, 1e-6 * std::max(1.0, std::abs(fd)));
        const auto [yb, db] = spline_forward(10.0 - 1e-9, kn);
        EXPECT_NEAR(yb, 10.0, 1e-8);
        EXPECT_NEAR(db, 1.0, 1e-6);
    }
}

TEST(Spline, RecordedVersionAgrees) {
    Rng rng(7);
    const SplineShape shape;
    const std::size_t rows = 50;
    Tensor raw = random_tensor({rows, shape.raw_size()}, rng, -3.0, 3.0);
    Tensor x = random_tensor({rows}, rng, -12.0, 12.0);
    const nn::Dual xd{Var::constant(x), {Var::constant(Tensor(Shape{rows}, 1.0))}};
    const nn::Dual rd = nn::Dual::constant(Var::constant(raw), 1);
    const nn::Dual y = spline_apply(xd, spline_knots(rd, shape));
    for (std::size_t r = 0; r < rows; ++r) {
        const auto row = raw.values().subspan(r * shape.raw_size(), shape.raw_size());
        const auto [ref_y, ref_dy] = spline_forward(x[r], spline_knots(row, shape));
        EXPECT_NEAR(y.value.value()[r], ref_y, 1e-13);
        EXPECT_NEAR(y.tangents[0].value()[r], ref_dy, 1e-12);
    }
}

TEST(Spline, ParameterGradients) {
    Rng rng(8);
    const SplineShape shape{.bins = 5, .bound = 3.0};
    ad::Parameter raw("raw", random_tensor({6, shape.raw_size()}, rng, -1.0, 1.0));
    ad::Parameter x("x", random_tensor({6}, rng, -2.9, 2.9));
    auto loss = [&] {
        nn::Dual xd{x.var(), {Var::constant(Tensor(Shape{6}, 1.0))}};
        const nn::Dual y = spline_apply(xd, spline_knots(nn::Dual::constant(raw.var(), 1), shape));
        return ad::add(ad::sum(ad::square(y.value)), ad::sum(ad::square(y.tangents[0])));
    };
    EXPECT_LE(ad::finite_diff_check(loss, {&raw, &x}), 1e-6);
}

TEST(Spline, NonFiniteParametersRejected) {
    const SplineShape shape;
    std::vector<double> raw(shape.raw_size(), 0.0);
    raw[3] = std::nan("");
    EXPECT_THROW(spline_knots(raw, shape), NumericalError);
}

class StackDims : public ::testing::TestWithParam<std::size_t> {};

TEST_P(StackDims, IdentityAtInitialization) {
    const std::size_t d = GetParam();
    for (StackPattern p : {StackPattern::Identity, StackPattern::LinearOnly, StackPattern::Full}) {
        DiffeoStack stack(DiffeoConfig{.dim = d, .pattern = p, .seed = 9});
        Rng rng(d);
        const Tensor x = random_tensor({20, d}, rng, -15.0, 15.0);
        EXPECT_EQ(stack.forward(x), x);
        EXPECT_EQ(stack.inverse(x), x);
        EXPECT_EQ(stack.jacobian(x.row(0)), Tensor::identity(d));
    }
}

TEST_P(StackDims, RoundtripJacobianAndOrientation) {
    const std::size_t d = GetParam();
    const DiffeoStack stack = random_stack(d, 10 + d);
    Rng rng(20 + d);
    const Tensor x = random_tensor({1000, d}, rng, -3.0, 3.0);
    const Tensor z = stack.forward(x);
    EXPECT_GT(ad::max_abs_diff(z, x), 1e-3);  // not the identity
    EXPECT_LE(ad::max_abs_diff(stack.inverse(z), x), 1e-8);
    for (std::size_t i = 0; i < 20; ++i) {
        const Tensor j = stack.jacobian(x.row(i));
        const Tensor fd = fd_jacobian(stack, x.row(i));
        for (std::size_t k = 0; k < d * d; ++k) EXPECT_LE(std::abs(j[k] - fd[k]) / std::max(1.0, std::abs(fd[k])), 1e-6);
        EXPECT_GT(ad::determinant(j), 0.0);
    }
}

INSTANTIATE_TEST_SUITE_P(Dims, StackDims, ::testing::Values(2, 3, 4, 8, 16));

TEST(Coupling, PassesFirstBlockUnchanged) {
    Rng rng(30);
    CouplingLayer layer("c", 5, SplineShape{}, 30, 2, rng);
    ad::ParameterRefs params;
    layer.collect(params);
    perturb(params, rng, 0.5);
    const Tensor x = random_tensor({10, 5}, rng, -3.0, 3.0);
    const Tensor y = layer.forward(nn::Dual::constant(Var::constant(x), 0)).value.value();
    EXPECT_EQ(layer.split(), 2u);
    for (std::size_t r = 0; r < 10; ++r)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(y.at(r, j), x.at(r, j));
    EXPECT_GT(ad::max_abs_diff(y, x), 1e-3);
}

TEST(Stack, JacobianGradientsReachParameters) {
    DiffeoStack stack = random_stack(3, 40);
    ad::ParameterRefs params;
    stack.collect(params);
    Rng rng(41);
    const Tensor x = random_tensor({4, 3}, rng, -2.0, 2.0);
    ad::Parameter v("v", random_tensor({4, 3}, rng));
    ad::ParameterRefs all = params;
    all.push_back(&v);
    auto loss = [&] { return ad::sum(ad::square(stack.pullback_velocity(Var::constant(x), v.var()))); };
    EXPECT_LE(ad::finite_diff_check(loss, all), 1e-6);
    const double input_err = ad::finite_diff_check_input(
        [&](const Var& xv) { return ad::sum(ad::square(stack.pullback_velocity(xv, v.var()))); }, x);
    EXPECT_LE(input_err, 1e-6);
}

TEST(Pullback, Examples) {
    DiffeoStack identity(DiffeoConfig{.dim = 2, .pattern = StackPattern::Identity});
    const Tensor v = Tensor::matrix(1, 2, {1, 4});
    EXPECT_EQ(identity.pullback_velocity(Var::constant(Tensor::matrix(1, 2, {0.3, -1})), Var::constant(v)).value(), v);

    DiffeoStack linear(DiffeoConfig{.dim = 2, .pattern = StackPattern::LinearOnly});
    ad::ParameterRefs params;
    linear.collect(params);
    elcd::testing::find_param(params, "diffeo.linear0.log_diag").set_value(Tensor::vector({0.0, std::log(4.0)}));
    const Tensor u = linear.pullback_velocity(Var::constant(Tensor::matrix(1, 2, {5, 6})), Var::constant(v)).value();
    EXPECT_NEAR(u[0], 1.0, 1e-15);
    EXPECT_NEAR(u[1], 1.0, 1e-15);
}

TEST(Pullback, SolveResidual) {
    const DiffeoStack stack = random_stack(4, 50);
    Rng rng(51);
    const Tensor x = random_tensor({30, 4}, rng, -3.0, 3.0);
    const Tensor v = random_tensor({30, 4}, rng);
    const Tensor u = stack.pullback_velocity(Var::constant(x), Var::constant(v)).value();
    for (std::size_t r = 0; r < 30; ++r) {
        const Tensor ju = ad::matvec(stack.jacobian(x.row(r)), u.row(r));
        EXPECT_LE(ad::max_abs_diff(ju, v.row(r)), 1e-9);
    }
}

TEST(Pad, Examples) {
    EXPECT_EQ(pad(Tensor::matrix(1, 2, {1, 2}), 4), Tensor::matrix(1, 4, {1, 2, 0, 0}));
    EXPECT_EQ(unpad(Tensor::matrix(1, 4, {1, 2, 3, 4}), 2), Tensor::matrix(1, 2, {1, 2}));
    Rng rng(60);
    const Tensor x = random_tensor({7, 3}, rng);
    EXPECT_EQ(unpad(pad(x, 5), 3), x);
    EXPECT_EQ(unpad(pad(Var::constant(x), 5), 3).value(), x);
    EXPECT_THROW(pad(x, 2), ShapeError);
    EXPECT_THROW(unpad(x, 4), ShapeError);
}

TEST(Transport, LinearToyReproducesDataField) {
    // phi(x) = P x with P = diag(1, 4); latent field P A P^-1 z.
    DiffeoStack stack(DiffeoConfig{.dim = 2, .pattern = StackPattern::LinearOnly});
    ad::ParameterRefs params;
    stack.collect(params);
    elcd::testing::find_param(params, "diffeo.linear0.log_diag").set_value(Tensor::vector({0.0, std::log(4.0)}));
    const Tensor a = Tensor::matrix(2, 2, {-1, 4, 0, -1});
    const Tensor p = Tensor::matrix(2, 2, {1, 0, 0, 4});
    const Tensor latent = ad::matmul(ad::matmul(p, a), ad::inverse(p));
    Rng rng(61);
    const Tensor x = random_tensor({100, 2}, rng, -3.0, 3.0);
    const Tensor z = stack.forward(x);
    Tensor fz(Shape{100, 2});
    for (std::size_t r = 0; r < 100; ++r) {
        const Tensor v = ad::matvec(latent, z.row(r));
        fz.at(r, 0) = v[0];
        fz.at(r, 1) = v[1];
    }
    const Tensor u = stack.pullback_velocity(Var::constant(x), Var::constant(fz)).value();
    for (std::size_t r = 0; r < 100; ++r) EXPECT_LE(ad::max_abs_diff(u.row(r), ad::matvec(a, x.row(r))), 1e-12);
}
