#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "stl2vec/ad/adam.hpp"
#include "stl2vec/ad/grad_check.hpp"
#include "stl2vec/ad/tape.hpp"
#include "stl2vec/stl/parser.hpp"
#include "stl2vec/stl/robustness.hpp"

using namespace stl2vec;
using ad::Matrix;
using ad::Tape;
using ad::Var;

TEST(SmoothExtrema, SymmetricPairAndSingleton) {
    for (double beta : {0.5, 1.0, 10.0}) {
        Tape t;
        Var z0 = t.constant(0.0), z1 = t.constant(0.0);
        EXPECT_NEAR(t.scalar(ad::smooth_max({z0, z1}, beta)), std::log(2.0) / beta, 1e-15);
        EXPECT_NEAR(t.scalar(ad::smooth_min({z0, z1}, beta)), -std::log(2.0) / beta, 1e-15);
        Var five = t.constant(5.0);
        EXPECT_EQ(t.scalar(ad::smooth_max({five}, beta)), 5.0);
        EXPECT_EQ(t.scalar(ad::smooth_min({five}, beta)), 5.0);
    }
}

TEST(SmoothExtrema, BoundsAtBetaTen) {
    Tape t;
    std::vector<Var> a{t.constant(1.0), t.constant(2.0), t.constant(3.0)};
    const double hi = t.scalar(ad::smooth_max(a, 10.0));
    const double lo = t.scalar(ad::smooth_min(a, 10.0));
    EXPECT_GE(hi, 3.0);
    EXPECT_LE(hi, 3.0 + std::log(3.0) / 10.0);
    EXPECT_LE(lo, 1.0);
    EXPECT_GE(lo, 1.0 - std::log(3.0) / 10.0);
}

TEST(SmoothExtrema, LargeBetaDoesNotOverflow) {
    Tape t;
    std::vector<Var> a{t.constant(400.0), t.constant(-300.0)};
    EXPECT_NEAR(t.scalar(ad::smooth_max(a, 1000.0)), 400.0, 1e-12);
    EXPECT_NEAR(t.scalar(ad::smooth_min(a, 1000.0)), -300.0, 1e-12);
}

TEST(SmoothExtrema, RejectsEmptyAndBadBeta) {
    Tape t;
    std::vector<Var> none;
    EXPECT_THROW(ad::smooth_max(none, 1.0), InvalidArgument);
    EXPECT_THROW(ad::smooth_min(none, 1.0), InvalidArgument);
    EXPECT_THROW(ad::smooth_max({t.constant(1.0)}, 0.0), InvalidArgument);
}

TEST(HardExtrema, ValueAndRouting) {
    Tape t;
    std::vector<Var> a{t.variable(-1.0), t.variable(-0.5), t.variable(3.0)};
    Var m = ad::hard_max(a);
    EXPECT_EQ(t.scalar(m), 3.0);
    t.backward(m);
    EXPECT_EQ(t.grad(a[0])(0, 0), 0.0);
    EXPECT_EQ(t.grad(a[1])(0, 0), 0.0);
    EXPECT_EQ(t.grad(a[2])(0, 0), 1.0);
}

TEST(HardExtrema, TieGoesToLowestIndex) {
    Tape t;
    std::vector<Var> a{t.variable(2.0), t.variable(2.0)};
    Var m = ad::hard_max(a);
    EXPECT_EQ(t.scalar(m), 2.0);
    t.backward(m);
    EXPECT_EQ(t.grad(a[0])(0, 0), 1.0);
    EXPECT_EQ(t.grad(a[1])(0, 0), 0.0);
    EXPECT_EQ(t.min_extremum_gap(), 0.0);

    Tape u;
    std::vector<Var> b{u.variable(1.0), u.variable(2.0)};
    EXPECT_EQ(u.scalar(ad::hard_min(b)), 1.0);
    std::vector<Var> none;
    EXPECT_THROW(ad::hard_max(none), InvalidArgument);
}

TEST(Backward, ElementaryDerivatives) {
    Tape t;
    Var w = t.variable(0.0);
    Var y = ad::tanh(w);
    t.backward(y);
    EXPECT_EQ(t.grad(w)(0, 0), 1.0);

    Tape u;
    Var a = u.variable(2.0), b = u.variable(3.0);
    Var p = a * b;
    u.backward(p);
    EXPECT_EQ(u.grad(a)(0, 0), 3.0);
    EXPECT_EQ(u.grad(b)(0, 0), 2.0);
}

TEST(Backward, RejectsNonScalarOutput) {
    Tape t;
    Var v = t.variable(Matrix::Ones(2, 1));
    EXPECT_THROW(t.backward(v), DimensionError);
}

TEST(Backward, NonFiniteValuesAreRejected) {
    Tape t;
    Var v = t.variable(-1.0);
    EXPECT_THROW(ad::log(v), NumericalError);
    EXPECT_THROW(t.variable(std::nan("")), NumericalError);
}

TEST(Backward, ConstantsReceiveNoGradient) {
    Tape t;
    Var c = t.constant(4.0);
    Var v = t.variable(1.5);
    Var y = c * v;
    t.backward(y);
    EXPECT_EQ(t.grad(v)(0, 0), 4.0);
    EXPECT_EQ(t.grad(c)(0, 0), 0.0);
}

TEST(Backward, ShapeMismatchThrows) {
    Tape t;
    Var a = t.variable(Matrix::Ones(2, 1));
    Var b = t.variable(Matrix::Ones(3, 1));
    EXPECT_THROW(a + b, DimensionError);
    EXPECT_THROW(ad::matmul(a, b), DimensionError);
}

// Random graph drawn from every op; the draw is seeded so the graph is fixed.
static Var random_graph(Tape& t, std::span<const Var> p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    // p[0]: 3x3 matrix, p[1]: 3x1 vector, p[2]: scalar
    Var h = ad::tanh(ad::matmul(p[0], p[1]) + t.constant(Matrix::Constant(3, 1, 0.1)));
    Var g = ad::sigmoid(h * p[1]);
    Var s = ad::sin(ad::element(g, 0)) + ad::cos(ad::element(h, 2)) * p[2];
    Var e = ad::exp(0.3 * ad::element(g, 1)) + ad::log(ad::element(g, 2) + 1.0);
    Var seg = ad::segment(ad::concat({h, g}), 2, 3);
    Var aff = ad::affine(seg, ad::RowVector::LinSpaced(3, -1.0, 1.0), 0.25);
    std::vector<Var> pool{s, e, aff, ad::sum(g), -p[2], 2.0 - s};
    std::shuffle(pool.begin(), pool.end(), rng);
    Var sm = ad::smooth_max(std::span<const Var>(pool).first(3), 3.0);
    Var sn = ad::smooth_min(std::span<const Var>(pool).last(3), 2.0);
    Var hm = ad::hard_max({sm, sn - 10.0});
    return hm * ad::stack({sn})  - sm;
}

TEST(GradCheck, RandomGraphsMatchFiniteDifferences) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n01;
    int checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Matrix> params{Matrix(3, 3), Matrix(3, 1), Matrix(1, 1)};
        for (auto& m : params)
            for (Eigen::Index k = 0; k < m.size(); ++k) m.reshaped()(k) = n01(rng);
        const std::uint64_t seed = rng();
        auto build = [seed](Tape& t, std::span<const Var> p) { return random_graph(t, p, seed); };
        const auto res = ad::grad_check(build, params, 1e-5);
        if (!res.checkable) continue;
        ++checked;
        EXPECT_LT(res.max_relative_error, 1e-4) << "trial " << trial;
        EXPECT_EQ(res.entries_checked, 13u);
    }
    EXPECT_GE(checked, 15);
}

TEST(GradCheck, LinearGraphIsExact) {
    std::vector<Matrix> params{Matrix::Constant(2, 1, 0.7), Matrix::Constant(1, 1, -0.2)};
    auto build = [](Tape& t, std::span<const Var> p) {
        return ad::affine(p[0], ad::RowVector::Constant(2, 3.0), 1.0) + 5.0 * p[1];
    };
    EXPECT_LT(ad::grad_check(build, params, 1e-5).max_relative_error, 1e-9);
}

TEST(GradCheck, HardMaxTieIsNotCheckable) {
    std::vector<Matrix> params{Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0)};
    auto build = [](Tape&, std::span<const Var> p) { return ad::hard_max({p[0], p[1]}); };
    EXPECT_FALSE(ad::grad_check(build, params).checkable);
}

TEST(Determinism, IdenticalGraphsGiveBitwiseIdenticalGradients) {
    std::vector<Matrix> params{Matrix::Random(3, 3), Matrix::Random(3, 1), Matrix::Random(1, 1)};
    std::vector<Matrix> g1, g2;
    for (auto* out : {&g1, &g2}) {
        Tape t;
        std::vector<Var> leaves;
        for (const auto& p : params) leaves.push_back(t.variable(p));
        Var y = random_graph(t, leaves, 11);
        t.backward(y);
        for (Var l : leaves) out->push_back(t.grad(l));
    }
    for (std::size_t k = 0; k < g1.size(); ++k) EXPECT_TRUE((g1[k].array() == g2[k].array()).all());
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    ad::AdamState st;
    std::vector<Matrix> p{Matrix::Constant(2, 2, 0.3)};
    std::vector<Matrix> g{Matrix::Zero(2, 2)};
    for (int k = 0; k < 3; ++k) st.step(p, g);
    EXPECT_TRUE((p[0].array() == 0.3).all());
    EXPECT_EQ(st.step_count(), 3);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    ad::AdamState st;
    std::vector<Matrix> p{Matrix::Constant(1, 1, 1.0)};
    std::vector<Matrix> g{Matrix::Constant(1, 1, 0.5)};
    st.step(p, g);
    // m_hat = g and v_hat = g^2 after bias correction
    const double expected = 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8);
    EXPECT_NEAR(p[0](0, 0), expected, 1e-15);
    EXPECT_NEAR(1.0 - p[0](0, 0), 1e-3, 1e-10);
}

TEST(Adam, SecondMomentAfterTwoIdenticalSteps) {
    ad::AdamState st;
    std::vector<Matrix> p{Matrix::Constant(1, 1, 0.0)};
    std::vector<Matrix> g{Matrix::Constant(1, 1, 2.0)};
    st.step(p, g);
    st.step(p, g);
    const double b2 = 0.999;
    EXPECT_NEAR(st.second_moment()[0](0, 0), (1 - b2) * (1 + b2) * 4.0, 1e-15);
}

TEST(Adam, ShapeMismatchThrows) {
    ad::AdamState st;
    std::vector<Matrix> p{Matrix::Zero(2, 1)};
    std::vector<Matrix> g{Matrix::Zero(3, 1)};
    EXPECT_THROW(st.step(p, g), DimensionError);
}

TEST(SmoothExtrema, BoundsAndConvergenceOverBetaGrid) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + rng() % 6;
        std::vector<double> a(m);
        for (auto& v : a) v = u(rng);
        const double mx = *std::max_element(a.begin(), a.end());
        const double mn = *std::min_element(a.begin(), a.end());
        double prev_hi = INFINITY, prev_lo = INFINITY;
        for (double beta : {1.0, 10.0, 100.0, 1000.0}) {
            Tape t;
            std::vector<Var> args;
            for (double v : a) args.push_back(t.constant(v));
            const double hi = t.scalar(ad::smooth_max(args, beta));
            const double lo = t.scalar(ad::smooth_min(args, beta));
            const double slack = std::log(static_cast<double>(m)) / beta + 1e-12;
            EXPECT_GE(hi, mx - 1e-12);
            EXPECT_LE(hi, mx + slack);
            EXPECT_LE(lo, mn + 1e-12);
            EXPECT_GE(lo, mn - slack);
            EXPECT_LE(hi - mx, prev_hi + 1e-15);
            EXPECT_LE(mn - lo, prev_lo + 1e-15);
            prev_hi = hi - mx;
            prev_lo = mn - lo;
        }
    }
}

TEST(GradCheck, SmoothEventuallyRobustness) {
    const auto f = stl::parse("F[0,2] 2*x1 - x2 > 0.5", 2);
    std::vector<Matrix> params;
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n01;
    for (int k = 0; k < 3; ++k) params.push_back(Eigen::Vector2d(n01(rng), n01(rng)));
    auto build = [&f](Tape& t, std::span<const Var> p) {
        return stl::robustness(t, f, p, stl::SmoothConfig::smooth(1.0));
    };
    // beta = 1 keeps every softmax weight well above the difference noise floor
    EXPECT_LT(ad::grad_check(build, params, 1e-5).max_relative_error, 1e-4);
}
