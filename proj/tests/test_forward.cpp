#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "fd.hpp"
#include "palentir/forward.hpp"
#include "palentir/pals.hpp"

using namespace palentir;
using palentir::testing::fd_jacobian;
using palentir::testing::max_column_error;

namespace {

Vec random_vec(Index n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    Vec v(n);
    for (Index i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
    return v;
}

// Line integral of the piecewise-constant cell image by dense midpoint sampling.
template <int D>
double sampled_line_integral(const GridSpec& g, const Vec& f, const std::array<double, D>& o,
                             const std::array<double, D>& dir) {
    double reach = 0.0;
    for (int a = 0; a < D; ++a) reach += std::pow(g.extent(a).width() + g.spacing(a), 2);
    reach = std::sqrt(reach) + 1.0;
    const int steps = 400000;
    const double dt = 2.0 * reach / steps;
    double s = 0.0;
    for (int k = 0; k < steps; ++k) {
        const double t = -reach + (k + 0.5) * dt;
        MultiIndex idx{0, 0, 0};
        bool inside = true;
        for (int a = 0; a < D; ++a) {
            const double x = o[a] + t * dir[a];
            const double lo = g.extent(a).lo - 0.5 * g.spacing(a);
            const double c = std::floor((x - lo) / g.spacing(a));
            if (c < 0 || c >= static_cast<double>(g.dim(a))) inside = false;
            idx[a] = static_cast<Index>(c);
        }
        if (inside) s += f[g.flatten(idx)] * dt;
    }
    return s;
}

} // namespace

TEST(Identity, PassesThrough) {
    IdentityModel m(5);
    const Vec f = random_vec(5, 1);
    EXPECT_EQ(m.apply(f), f);
    EXPECT_THROW(m.apply(Vec::Zero(4)), ConfigError);
}

TEST(Convolution, KernelNormalisedAndSymmetric) {
    const Kernel2d k = gaussian_kernel(7, 1.0);
    double s = 0.0;
    for (double v : k.weights) s += v;
    EXPECT_NEAR(s, 1.0, 1e-14);
    EXPECT_DOUBLE_EQ(k.at(-3, 2), k.at(3, -2));
    EXPECT_DOUBLE_EQ(k.at(1, 0), k.at(0, 1));
    // ratio of neighbouring taps is exp(-1/2) at unit variance
    EXPECT_NEAR(k.at(1, 0) / k.at(0, 0), std::exp(-0.5), 1e-14);
    EXPECT_THROW(gaussian_kernel(6, 1.0), ConfigError);
    EXPECT_THROW(gaussian_kernel(7, 0.0), ConfigError);
}

TEST(Convolution, MatrixMatchesDirectSum) {
    const GridSpec g = make_unit_grid({13, 11});
    const ConvolutionModel m(g, gaussian_kernel(7, 1.0));
    const Vec f = random_vec(g.num_points(), 4);
    EXPECT_LT((m.apply(f) - m.convolve_direct(f)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Convolution, ImpulseGivesKernel) {
    const GridSpec g = make_unit_grid({11, 11});
    const ConvolutionModel m(g, gaussian_kernel(5, 2.0));
    Vec f = Vec::Zero(g.num_points());
    f[g.flatten({5, 5, 0})] = 1.0;
    const Vec y = m.apply(f);
    for (Index di = -2; di <= 2; ++di)
        for (Index dj = -2; dj <= 2; ++dj)
            EXPECT_DOUBLE_EQ(y[g.flatten({5 + di, 5 + dj, 0})], m.kernel().at(-di, -dj));
    EXPECT_NEAR(y.sum(), 1.0, 1e-14);
}

TEST(Radon, AnglePresets) {
    const auto sparse = radon2d_angles(AngleMode::sparse, 15);
    const auto limited = radon2d_angles(AngleMode::limited, 15);
    ASSERT_EQ(sparse.size(), 15u);
    ASSERT_EQ(limited.size(), 15u);
    EXPECT_DOUBLE_EQ(sparse[1], 24.0);
    EXPECT_DOUBLE_EQ(limited.front(), 1.0);
    EXPECT_DOUBLE_EQ(limited.back(), 90.0);
}

TEST(Radon, RowsMatchSampledLineIntegrals) {
    const GridSpec g = make_unit_grid({9, 9});
    const Vec f = random_vec(g.num_points(), 8, 0.0, 1.0);
    const std::vector<double> angles = {0.0, 17.0, 45.0, 90.0, 133.0};
    const Radon2dModel m(g, angles);
    const Vec y = m.apply(f);
    const Index nd = m.data_len() / static_cast<Index>(angles.size());
    for (std::size_t a = 0; a < angles.size(); ++a) {
        const double th = angles[a] * std::numbers::pi / 180.0;
        for (Index k = 0; k < nd; k += 3) {
            const double s = (static_cast<double>(k) - 0.5 * static_cast<double>(nd - 1)) * g.spacing(0);
            const double want = sampled_line_integral<2>(g, f, {s * std::cos(th), s * std::sin(th)},
                                                         {-std::sin(th), std::cos(th)});
            EXPECT_NEAR(y[static_cast<Index>(a) * nd + k], want, 2e-4) << "angle " << angles[a] << " det " << k;
        }
    }
}

TEST(Radon, AdjointIdentity) {
    const GridSpec g = make_unit_grid({12, 12});
    const Radon2dModel m(g, radon2d_angles(AngleMode::sparse, 7));
    const Vec x = random_vec(m.image_len(), 1), y = random_vec(m.data_len(), 2);
    EXPECT_NEAR(m.apply(x).dot(y), x.dot(m.adjoint(y)), 1e-10);
}

TEST(Radon, MassIsConservedAtZeroDegrees) {
    // every cell is crossed by exactly one detector's worth of rays when spacing = h
    const GridSpec g = make_unit_grid({10, 10});
    const Radon2dModel m(g, {0.0}, 10, g.spacing(0));
    const Vec f = random_vec(g.num_points(), 5, 0.0, 1.0);
    EXPECT_NEAR(m.apply(f).sum() * g.spacing(0), f.sum() * g.spacing(0) * g.spacing(1), 1e-12);
}

TEST(Parallel3d, DirectionsOnQuarterSphere) {
    const auto d = parallel3d_directions(31);
    ASSERT_EQ(d.size(), 31u);
    for (const auto& v : d) {
        EXPECT_NEAR(v[0] * v[0] + v[1] * v[1] + v[2] * v[2], 1.0, 1e-12);
        EXPECT_GE(v[0], 0.0);
        EXPECT_GE(v[1], 0.0);
    }
}

TEST(Parallel3d, RowsMatchSampledLineIntegrals) {
    const GridSpec g = make_unit_grid({6, 6, 6});
    const Vec f = random_vec(g.num_points(), 3, 0.0, 1.0);
    const auto dirs = parallel3d_directions(4);
    const Parallel3dModel m(g, dirs, 5);
    const Vec y = m.apply(f);
    for (std::size_t v = 0; v < dirs.size(); ++v) {
        const auto [u, w] = Parallel3dModel::detector_axes(dirs[v]);
        for (Index iu = 0; iu < 5; iu += 2)
            for (Index iw = 0; iw < 5; iw += 2) {
                std::array<double, 3> o{};
                for (int a = 0; a < 3; ++a) o[a] = m.offset(iu) * u[a] + m.offset(iw) * w[a];
                const double want = sampled_line_integral<3>(g, f, o, dirs[v]);
                EXPECT_NEAR(y[(static_cast<Index>(v) * 5 + iu) * 5 + iw], want, 3e-4);
            }
    }
}

TEST(Parallel3d, AdjointIdentity) {
    const GridSpec g = make_unit_grid({7, 7, 7});
    const Parallel3dModel m(g, parallel3d_directions(5));
    const Vec x = random_vec(m.image_len(), 1), y = random_vec(m.data_len(), 2);
    EXPECT_NEAR(m.apply(x).dot(y), x.dot(m.adjoint(y)), 1e-10);
}

TEST(Dot, SymmetricOperator) {
    const GridSpec g = make_grid({12, 12}, {{0.0, 4.0}, {0.0, 4.0}});
    const Dot2dModel m(g, {0.03, 0.0, 1.0, 0.5, 6, 6});
    const auto a = m.assemble(Vec::Constant(g.num_points(), 0.02));
    const Eigen::MatrixXcd d = Eigen::MatrixXcd(a);
    EXPECT_LT((d - d.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dot, FrequencyConjugation) {
    const GridSpec g = make_grid({10, 10}, {{0.0, 4.0}, {0.0, 4.0}});
    const Vec f = Vec::Constant(g.num_points(), 0.02);
    const Dot2dModel plus(g, {0.03, 0.3, 1.0, 0.5, 4, 4}), minus(g, {0.03, -0.3, 1.0, 0.5, 4, 4});
    const Eigen::MatrixXcd p = plus.transfer(f), q = minus.transfer(f);
    EXPECT_LT((p - q.conjugate()).cwiseAbs().maxCoeff(), 1e-12 * p.cwiseAbs().maxCoeff());
    EXPECT_EQ(plus.data_len(), 32);
}

TEST(Dot, AbsorptionLowersSignal) {
    const GridSpec g = make_grid({12, 12}, {{0.0, 4.0}, {0.0, 4.0}});
    const Dot2dModel m(g, {0.03, 0.0, 1.0, 0.5, 6, 6});
    const Vec lo = m.apply(Vec::Constant(g.num_points(), 0.01));
    const Vec hi = m.apply(Vec::Constant(g.num_points(), 0.05));
    EXPECT_TRUE((lo.array() > 0.0).all());
    EXPECT_TRUE((hi.array() < lo.array()).all());
}

TEST(Dot, JacobianMatchesDifferences) {
    const GridSpec g = make_grid({14, 14}, {{0.0, 4.0}, {0.0, 4.0}});
    for (double omega : {0.0, 0.2}) {
        const Dot2dModel m(g, {0.03, omega, 1.0, 0.5, 8, 8});
        PalsParams p = PalsParams::default_initial(BasisGrid::lattice(3, g), PalsConstants::defaults_dot(), 2);
        p.alpha = random_vec(p.num_basis(), 6, -1.0, 2.0);
        p.constants.w = 0.05;
        const ContrastBounds b = ContrastBounds::uniform(g, 0.01, 0.05);
        auto fn = [&](const Vec& v) { return m.apply(eval_f(PalsParams::unpack(v, p.basis, p.constants), b, g).values()); };
        const Mat analytic = m.jacobian_times(eval_f(p, b, g).values(), jacobian_f(p, b, g));
        EXPECT_LT(max_column_error(analytic, fd_jacobian(fn, p.pack()), 1e-12), 1e-5) << "omega " << omega;
    }
}
