#include <gtest/gtest.h>

#include <cmath>

#include "elcd/autodiff/gradcheck.hpp"
#include "elcd/autodiff/jacobian.hpp"
#include "elcd/autodiff/linalg.hpp"
#include "elcd/autodiff/ops.hpp"
#include "elcd/errors.hpp"
#include "elcd/nn/layers.hpp"
#include "op_cases.hpp"
#include "test_util.hpp"

using namespace elcd;
using namespace elcd::ad;
using elcd::testing::random_tensor;

TEST(Primitives, SpecValues) {
    EXPECT_EQ(tanh(Var::constant(Tensor::scalar(0.0))).value().item(), 0.0);
    EXPECT_DOUBLE_EQ(softplus(Var::constant(Tensor::scalar(0.0))).value().item(), 0.6931471805599453);
    Rng rng(3);
    const Tensor m = random_tensor({3, 3}, rng);
    EXPECT_EQ(matmul(Var::constant(Tensor::identity(3)), Var::constant(m)).value(), m);
}

TEST(Primitives, ShapeMismatchNamesBothShapes) {
    try {
        add(Var::constant(Tensor(Shape{2, 3})), Var::constant(Tensor(Shape{3, 2})));
        FAIL();
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[3, 2]"), std::string::npos) << msg;
    }
}

TEST(LinearSolve, Examples) {
    const Tensor y = linear_solve(Var::constant(Tensor::identity(2)), Var::constant(Tensor::vector({3, 4}))).value();
    EXPECT_EQ(y, Tensor::vector({3, 4}));
    const Tensor y2 =
        linear_solve(Var::constant(Tensor::matrix(2, 2, {2, 0, 0, 4})), Var::constant(Tensor::vector({2, 4}))).value();
    EXPECT_EQ(y2, Tensor::vector({1, 1}));
}

TEST(LinearSolve, SingularReportsPivot) {
    try {
        linear_solve(Var::constant(Tensor::matrix(2, 2, {1, 2, 2, 4})), Var::constant(Tensor::vector({1, 1})));
        FAIL();
    } catch (const SingularMatrixError& e) {
        EXPECT_EQ(e.pivot(), 1u);
    }
}

TEST(LinearSolve, GradientMatchesFiniteDifferences) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a = random_tensor({4, 4}, rng);
        for (std::size_t i = 0; i < 4; ++i) a.at(i, i) += 5.0;
        Parameter pa("a", a), pb("b", random_tensor({4}, rng));
        const double err =
            finite_diff_check([&] { return sum(linear_solve(pa.var(), pb.var())); }, ParameterRefs{&pa, &pb});
        EXPECT_LE(err, 1e-6);
    }
}

TEST(LinearSolve, BatchedGradient) {
    Rng rng(12);
    Tensor a = random_tensor({3, 3, 3}, rng);
    for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t i = 0; i < 3; ++i) a[b * 9 + i * 3 + i] += 4.0;
    Parameter pa("a", a), pb("b", random_tensor({3, 3}, rng)), pw("w", random_tensor({3, 3}, rng));
    const double err = finite_diff_check(
        [&] { return sum(mul(linear_solve(pa.var(), pb.var()), pw.var())); }, ParameterRefs{&pa, &pb, &pw});
    EXPECT_LE(err, 1e-6);
}

TEST(LinearSolve, ResidualOnConditionedSystems) {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + trial % 15;
        // Q diag(s) Q^T with singular values spanning at most 1e6.
        Tensor q = random_tensor({n, n}, rng);
        Tensor a(Shape{n, n});
        for (std::size_t i = 0; i < n; ++i) {
            const double s = std::pow(10.0, uniform(rng, 0.0, 3.0));
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < n; ++c) a.at(r, c) += q.at(r, i) * s * q.at(c, i);
        }
        for (std::size_t i = 0; i < n; ++i) a.at(i, i) += 1.0;
        const Tensor b = random_tensor({n}, rng);
        const Tensor y = solve(a, b);
        EXPECT_LE(max_abs(matvec(a, y) - b) / max_abs(b), 1e-10);
    }
}

TEST(Backward, Examples) {
    Parameter x("x", Tensor::vector({1, 2, 3}));
    GradientMap g = backward(sum(x.var()));
    EXPECT_EQ(g.at("x"), Tensor::vector({1, 1, 1}));

    Parameter y("y", Tensor::vector({1, -2}));
    g = backward(scale(sum(square(y.var())), 0.5));
    EXPECT_EQ(g.at("y"), Tensor::vector({1, -2}));
}

TEST(Backward, NonScalarLossThrows) {
    Parameter x("x", Tensor::vector({1, 2}));
    EXPECT_THROW(backward(x.var()), ShapeError);
}

TEST(Backward, RepeatableAndDeterministic) {
    Rng rng(5);
    nn::Mlp net("net", 3, {8, 8}, 2, rng);
    ParameterRefs params;
    net.collect(params);
    const Tensor xs = random_tensor({5, 3}, rng);
    const Var loss = sum(square(net(Var::constant(xs))));
    const GradientMap g1 = backward(loss);
    const GradientMap g2 = backward(loss);
    ASSERT_EQ(g1.size(), params.size());
    for (const auto& [id, t] : g1) EXPECT_EQ(t, g2.at(id));
    const Var loss2 = sum(square(net(Var::constant(xs))));
    EXPECT_EQ(loss.value(), loss2.value());
    for (const auto& [id, t] : backward(loss2)) EXPECT_EQ(t, g1.at(id));
}

TEST(Backward, FrozenParameterOmitted) {
    Parameter a("a", Tensor::vector({1, 2})), b("b", Tensor::vector({3, 4}), false);
    const GradientMap g = backward(sum(mul(a.var(), b.var())));
    EXPECT_TRUE(g.contains("a"));
    EXPECT_FALSE(g.contains("b"));
}

TEST(FiniteDiff, Examples) {
    Rng rng(1);
    Parameter p("p", random_tensor({5}, rng));
    EXPECT_LE(finite_diff_check([&] { return scale(sum(square(p.var())), 3.0); }, ParameterRefs{&p}), 1e-9);
    EXPECT_EQ(finite_diff_check([&] { return Var::constant(Tensor::scalar(2.0)); }, ParameterRefs{&p}), 0.0);
    nn::Mlp net("net", 2, {6, 6}, 1, rng);
    ParameterRefs params;
    net.collect(params);
    const Tensor xs = random_tensor({4, 2}, rng);
    EXPECT_LE(finite_diff_check([&] { return sum(net(Var::constant(xs))); }, params), 1e-6);
}

// The five-point rule is exact on quartics; the three-point rule is off by h^2 x.
TEST(FiniteDiff, FivePointStencilIsExactOnQuartics) {
    Parameter p("p", Tensor::vector({0.5, 1.5}));
    const auto quartic = [&] { return sum(square(square(p.var()))); };
    EXPECT_LE(finite_diff_check(quartic, ParameterRefs{&p}, 0.1, Stencil::FivePoint), 1e-12);
    EXPECT_GT(finite_diff_check(quartic, ParameterRefs{&p}, 0.1, Stencil::ThreePoint), 1e-3);
    const auto input_quartic = [](const Var& x) { return sum(square(square(x))); };
    EXPECT_LE(finite_diff_check_input(input_quartic, Tensor::vector({-0.7, 1.1}), 0.1, Stencil::FivePoint), 1e-12);
}

// Every recorded op against central differences on random inputs in [-2, 2].
class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
    Rng rng(static_cast<std::uint64_t>(GetParam()));
    elcd::testing::OpCases ops(rng);
    for (std::size_t i = 0; i < ops.cases.size(); ++i) {
        EXPECT_LE(finite_diff_check(ops.cases[i], ops.params()), 1e-6) << "case " << i;
    }
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradient, ::testing::Range(1, 6));

TEST(Jacobian, MatchesFiniteDifferences) {
    Rng rng(21);
    nn::Mlp net("net", 3, {7}, 2, rng);
    const BatchFn f = [&](const Var& x) { return net(x); };
    const Tensor x = random_tensor({3}, rng);
    const Tensor j = jacobian(f, x, 2);
    NoGradGuard guard;
    for (std::size_t c = 0; c < 3; ++c) {
        Tensor xp = x, xm = x;
        xp[c] += 1e-6;
        xm[c] -= 1e-6;
        const Tensor fp = net(Var::constant(xp.reshaped({1, 3}))).value();
        const Tensor fm = net(Var::constant(xm.reshaped({1, 3}))).value();
        for (std::size_t r = 0; r < 2; ++r) EXPECT_NEAR(j.at(r, c), (fp[r] - fm[r]) / 2e-6, 1e-8);
    }
}

TEST(Dual, TangentsMatchJacobianAndAreDifferentiable) {
    Rng rng(31);
    nn::ResidualNet net("cond", 2, 5, 2, 3, rng);
    ParameterRefs params;
    net.collect(params);
    // Give the zero-initialized output layer some weight so tangents are nontrivial.
    for (auto* p : params)
        for (double& v : p->mutable_values())
            if (v == 0.0) v = uniform(rng, -0.5, 0.5);
    const Tensor x = random_tensor({4, 2}, rng);
    auto tangent_sum = [&] {
        nn::Dual in{Var::constant(x), {}};
        for (std::size_t k = 0; k < 2; ++k) {
            Tensor e(Shape{4, 2});
            for (std::size_t r = 0; r < 4; ++r) e.at(r, k) = 1.0;
            in.tangents.push_back(Var::constant(e));
        }
        nn::Dual out = nn::dual::softmax_last(net(in));
        out = nn::dual::cumsum_last(nn::dual::softplus(out));
        return sum(square(add(out.tangents[0], scale(out.tangents[1], 0.7))));
    };
    EXPECT_LE(finite_diff_check(tangent_sum, params), 1e-6);

    // tangent direction k equals column k of the Jacobian
    nn::Dual in{Var::constant(x.row(0).reshaped({1, 2})), {}};
    in.tangents = {Var::constant(Tensor::matrix(1, 2, {1, 0})), Var::constant(Tensor::matrix(1, 2, {0, 1}))};
    const nn::Dual out = net(in);
    const Tensor j = jacobian([&](const Var& v) { return net(v); }, x.row(0), 3);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(out.tangents[k].value()[r], j.at(r, k), 1e-12);
}
