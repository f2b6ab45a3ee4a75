#include <cmath>

#include <gtest/gtest.h>

#include "palentir/rng.hpp"
#include "palentir/solver.hpp"

using namespace palentir;

namespace {

NllsProblem linear_problem(const Mat& a, const Vec& b) {
    NllsProblem pr;
    pr.residual = [a, b](const Vec& p) -> Vec { return a * p - b; };
    pr.jacobian = [a](const Vec&) -> Mat { return a; };
    pr.p0 = Vec::Zero(a.cols());
    return pr;
}

Mat random_mat(Index m, Index n, std::uint64_t seed) {
    Rng rng(seed);
    Mat a(m, n);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
    return a;
}

NllsProblem rosenbrock() {
    NllsProblem pr;
    pr.residual = [](const Vec& p) -> Vec {
        Vec r(2);
        r << 10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0];
        return r;
    };
    pr.jacobian = [](const Vec& p) -> Mat {
        Mat j(2, 2);
        j << -20.0 * p[0], 10.0, -1.0, 0.0;
        return j;
    };
    pr.p0 = Vec(2);
    pr.p0 << -1.2, 1.0;
    return pr;
}

} // namespace

TEST(Solver, LinearMatchesNormalEquations) {
    for (std::uint64_t s = 1; s <= 5; ++s) {
        const Mat a = random_mat(40, 6, s);
        const Vec b = random_mat(40, 1, s + 100);
        const Vec oracle = (a.transpose() * a).ldlt().solve(a.transpose() * b);
        SolveOptions o;
        o.tol_decrease = 1e-14;
        const SolveReport rep = solve(linear_problem(a, b), o);
        EXPECT_LT((rep.p - oracle).norm(), 1e-8 * std::max(1.0, oracle.norm()));
    }
}

TEST(Solver, AcceptedResidualsNeverRise) {
    SolveOptions o;
    o.tol_decrease = 1e-12;
    const SolveReport rep = solve(rosenbrock(), o);
    for (std::size_t k = 1; k < rep.residual_sq.size(); ++k) EXPECT_LT(rep.residual_sq[k], rep.residual_sq[k - 1]);
    EXPECT_NEAR(rep.p[0], 1.0, 1e-5);
    EXPECT_NEAR(rep.p[1], 1.0, 1e-5);
    EXPECT_EQ(rep.accepted + 1, static_cast<int>(rep.residual_sq.size()));
}

TEST(Solver, StopsOnRelativeDecrease) {
    // nonzero residual at the optimum so the drop test, not exact zero, ends it
    NllsProblem pr = rosenbrock();
    auto base = pr.residual;
    pr.residual = [base](const Vec& p) -> Vec {
        Vec r(3);
        r << base(p), 0.1 * p[0] + 0.3;
        return r;
    };
    auto bj = pr.jacobian;
    pr.jacobian = [bj](const Vec& p) -> Mat {
        Mat j(3, 2);
        j << bj(p), 0.1, 0.0;
        return j;
    };
    const SolveReport rep = solve(pr);
    EXPECT_EQ(rep.reason, StopReason::decrease);
    const auto& r = rep.residual_sq;
    ASSERT_GE(r.size(), 2u);
    EXPECT_LT((r[r.size() - 2] - r.back()) / r[r.size() - 2], 1e-3);
    for (std::size_t k = 1; k + 1 < r.size(); ++k) EXPECT_GE((r[k - 1] - r[k]) / r[k - 1], 1e-3);
}

TEST(Solver, StopsAtNoiseFloor) {
    SolveOptions o;
    o.noise_norm_sq = 1.0;
    const SolveReport rep = solve(rosenbrock(), o);
    EXPECT_EQ(rep.reason, StopReason::noise_floor);
    EXPECT_LE(rep.final_residual_sq(), 1.0);
    EXPECT_GT(rep.residual_sq[rep.residual_sq.size() - 2], 1.0);
}

TEST(Solver, StopsAtIterationCap) {
    SolveOptions o;
    o.tol_decrease = 0.0;
    o.max_iter = 3;
    const SolveReport rep = solve(rosenbrock(), o);
    EXPECT_EQ(rep.reason, StopReason::max_iter);
    EXPECT_EQ(rep.iterations, 3);
}

TEST(Solver, DefaultCapIsTenThousand) {
    EXPECT_EQ(SolveOptions{}.max_iter, 10000);
    EXPECT_DOUBLE_EQ(SolveOptions{}.tol_decrease, 1e-3);
}

TEST(Solver, StationaryStartStopsOnStepSize) {
    // r(p) = 1 + p^2 has zero gradient at p = 0 but a positive residual
    NllsProblem pr;
    pr.residual = [](const Vec& p) -> Vec { return Vec::Constant(1, 1.0 + p[0] * p[0]); };
    pr.jacobian = [](const Vec& p) -> Mat { return Mat::Constant(1, 1, 2.0 * p[0]); };
    pr.p0 = Vec::Zero(1);
    const SolveReport rep = solve(pr);
    EXPECT_EQ(rep.reason, StopReason::step_too_small);
    EXPECT_EQ(rep.accepted, 0);
}

TEST(Solver, RangeErrorsCountAsRejections) {
    // the model refuses p > 0.5; the optimum sits at 0.5 on the boundary side
    NllsProblem pr;
    pr.residual = [](const Vec& p) -> Vec {
        if (p[0] > 0.5) throw NumericError("out of range");
        return Vec::Constant(1, p[0] - 2.0);
    };
    pr.jacobian = [](const Vec&) -> Mat { return Mat::Ones(1, 1); };
    pr.p0 = Vec::Zero(1);
    const SolveReport rep = solve(pr);
    EXPECT_LE(rep.p[0], 0.5);
    EXPECT_GT(rep.p[0], 0.0);
}

TEST(Solver, BadOptionsAreConfigErrors) {
    SolveOptions o;
    o.max_iter = 0;
    EXPECT_THROW(solve(rosenbrock(), o), ConfigError);
    o = {};
    o.lambda_search = 0.5;
    EXPECT_THROW(solve(rosenbrock(), o), ConfigError);
    NllsProblem pr = rosenbrock();
    pr.p0[0] = std::nan("");
    EXPECT_THROW(solve(pr), NumericError);
}

TEST(Solver, RecordsIteratesAndConditioning) {
    SolveOptions o;
    o.keep_iterates = true;
    o.record_cond = true;
    const Mat a = random_mat(10, 3, 9);
    const SolveReport rep = solve(linear_problem(a, Vec::Ones(10)), o);
    ASSERT_EQ(rep.iterates.size(), rep.residual_sq.size());
    ASSERT_EQ(rep.cond.size(), rep.residual_sq.size());
    for (double c : rep.cond) EXPECT_DOUBLE_EQ(c, rep.cond[0]); // J does not depend on p
}

TEST(Conditioning, DiagonalAndRankDeficient) {
    Mat d = Mat::Zero(4, 3);
    d(0, 0) = 100.0;
    d(1, 1) = 10.0;
    d(2, 2) = 1.0;
    EXPECT_NEAR(condition_number(d), 100.0, 1e-10);
    d(2, 2) = 0.0;
    EXPECT_TRUE(std::isinf(condition_number(d)));
    EXPECT_TRUE(std::isinf(condition_number(Mat::Ones(2, 3))));
}

TEST(Solver, FiniteDifferenceSpotCheckWarns) {
    NllsProblem pr = rosenbrock();
    pr.jacobian = [](const Vec&) -> Mat { return Mat::Identity(2, 2); };
    SolveOptions o;
    o.fd_check_columns = 2;
    o.max_iter = 1;
    EXPECT_FALSE(solve(pr, o).warnings.empty());
    o.fd_check_columns = 2;
    EXPECT_TRUE(solve(rosenbrock(), o).warnings.empty());
}
