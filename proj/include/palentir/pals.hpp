#pragma once

// Parametric level sets built from anisotropic Gaussian basis functions (ABFs),
// plus the legacy radial-basis (RBF) model kept for conditioning comparisons.
//
//   phi(r; p) = sum_j sigma_h(alpha_j) * exp(-|R_j (r - chi_j)|^2)
//   f(r; p)   = C_H * T_w(phi - c) + C_L * (1 - T_w(phi - c))
//
// Centers chi_j are fixed on a lattice; only (alpha, beta, gamma) are unknown.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "palentir/bounds.hpp"
#include "palentir/error.hpp"
#include "palentir/fields.hpp"
#include "palentir/rng.hpp"

namespace palentir {

// ---------------------------------------------------------------------------
// Scalar building blocks
// ---------------------------------------------------------------------------

/// Smooth step T_w(x) = 1/2 [1 + (2/pi) atan(pi x / w)], maps R onto (0,1).
inline double transition(double x, double w) {
    return 0.5 * (1.0 + (2.0 / std::numbers::pi) * std::atan(std::numbers::pi * x / w));
}

inline double transition_deriv(double x, double w) {
    const double t = std::numbers::pi * x / w;
    return (1.0 / w) / (1.0 + t * t);
}

/// Bounded weight sigma_h(alpha) = tanh(alpha/2) in (-1,1).
inline double sigma_h(double alpha) { return std::tanh(0.5 * alpha); }

inline double sigma_h_deriv(double alpha) {
    const double s = 1.0 / std::cosh(0.5 * alpha);
    return 0.5 * s * s;
}

inline constexpr double kMaxAbsBeta = 50.0;

namespace detail {
inline void check_beta(double beta) {
    if (!std::isfinite(beta) || std::abs(beta) > kMaxAbsBeta)
        throw NumericError("beta out of range");
}
} // namespace detail

/// mu * [[e^b, g], [0, e^-b]]; det = mu^2.
inline Eigen::Matrix2d stretch_slide_2d(double beta, double gamma, double mu) {
    detail::check_beta(beta);
    Eigen::Matrix2d r;
    r << std::exp(beta), gamma, 0.0, std::exp(-beta);
    return mu * r;
}

namespace detail {

// The three unit-determinant shear factors of the 3D dilation matrix, in product order.
inline Eigen::Matrix3d shear_factor(int which, double beta, double gamma) {
    const double e = std::exp(beta), ei = std::exp(-beta);
    Eigen::Matrix3d s;
    switch (which) {
    case 0: s << e, gamma, 0, 0, ei, 0, 0, 0, 1; break;
    case 1: s << 1, 0, 0, 0, e, gamma, 0, 0, ei; break;
    default: s << e, 0, gamma, 0, 1, 0, 0, 0, ei; break;
    }
    return s;
}

inline Eigen::Matrix3d shear_factor_dbeta(int which, double beta) {
    const double e = std::exp(beta), ei = std::exp(-beta);
    Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
    switch (which) {
    case 0: s(0, 0) = e; s(1, 1) = -ei; break;
    case 1: s(1, 1) = e; s(2, 2) = -ei; break;
    default: s(0, 0) = e; s(2, 2) = -ei; break;
    }
    return s;
}

inline Eigen::Matrix3d shear_factor_dgamma(int which) {
    Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
    switch (which) {
    case 0: s(0, 1) = 1; break;
    case 1: s(1, 2) = 1; break;
    default: s(0, 2) = 1; break;
    }
    return s;
}

} // namespace detail

/// mu * S1(b1,g1) * S2(b2,g2) * S3(b3,g3); det = mu^3.
inline Eigen::Matrix3d stretch_slide_3d(const Eigen::Vector3d& beta, const Eigen::Vector3d& gamma,
                                        double mu) {
    for (int a = 0; a < 3; ++a) detail::check_beta(beta[a]);
    return mu * detail::shear_factor(0, beta[0], gamma[0]) *
           detail::shear_factor(1, beta[1], gamma[1]) * detail::shear_factor(2, beta[2], gamma[2]);
}

/// exp(-|R (r - chi)|^2)
template <int D>
double abf(const Eigen::Matrix<double, D, 1>& point, const Eigen::Matrix<double, D, 1>& center,
           const Eigen::Matrix<double, D, D>& dilation) {
    return std::exp(-(dilation * (point - center)).squaredNorm());
}

// ---------------------------------------------------------------------------
// Model description
// ---------------------------------------------------------------------------

struct PalsConstants {
    double mu = 10.0;
    double c = 0.01;
    double w = 0.05;

    static PalsConstants defaults_2d() { return {10.0, 0.01, 0.05}; }
    static PalsConstants defaults_ct3d() { return {10.0, 0.01, 0.001}; }
    static PalsConstants defaults_dot() { return {4.0, 0.01, 0.001}; }

    void validate() const {
        if (!(mu > 0.0)) throw ConfigError("mu must be positive");
        if (!(c > 0.0 && c < 1.0)) throw ConfigError("c must lie in (0,1)");
        if (!(w > 0.0)) throw ConfigError("w must be positive");
    }
};

/// Fixed basis-function centers.
struct BasisGrid {
    int dim = 2;
    std::vector<Point> centers;

    Index size() const { return static_cast<Index>(centers.size()); }

    /// n^d centers at the cell midpoints of an n x ... x n partition of the grid extent.
    static BasisGrid lattice(Index n, const GridSpec& grid) {
        if (n < 1) throw ConfigError("basis lattice size must be >= 1");
        BasisGrid b;
        b.dim = grid.ndim();
        auto at = [&](int axis, Index k) {
            const auto& e = grid.extent(axis);
            return e.lo + (static_cast<double>(k) + 0.5) * e.width() / static_cast<double>(n);
        };
        if (b.dim == 2) {
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < n; ++j) b.centers.push_back({at(0, i), at(1, j), 0.0});
        } else {
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < n; ++j)
                    for (Index k = 0; k < n; ++k) b.centers.push_back({at(0, i), at(1, j), at(2, k)});
        }
        return b;
    }

    bool within(const GridSpec& grid) const {
        if (grid.ndim() != dim) return false;
        for (const auto& c : centers)
            if (!grid.contains(c)) return false;
        return true;
    }
};

/// Shape parameters per basis: 1 (2D) or 3 (3D) stretch and slide values.
inline int shape_params_per_basis(int dim) { return dim == 2 ? 1 : 3; }

/// Unknowns of the ABF model. Packed as [alpha (N); beta (N*k, basis-major);
/// gamma (N*k, basis-major)] with k = 1 in 2D and 3 in 3D.
struct PalsParams {
    BasisGrid basis;
    PalsConstants constants;
    Vec alpha;
    Mat beta;  // N x k
    Mat gamma; // N x k

    int dim() const { return basis.dim; }
    Index num_basis() const { return basis.size(); }
    Index num_params() const { return num_params(basis); }

    static Index num_params(const BasisGrid& b) {
        return b.size() * (1 + 2 * shape_params_per_basis(b.dim));
    }

    Vec pack() const {
        const Index n = num_basis();
        const int k = shape_params_per_basis(dim());
        Vec p(num_params());
        p.head(n) = alpha;
        for (Index j = 0; j < n; ++j)
            for (int a = 0; a < k; ++a) {
                p[n + j * k + a] = beta(j, a);
                p[n + n * k + j * k + a] = gamma(j, a);
            }
        return p;
    }

    static PalsParams unpack(const Vec& p, const BasisGrid& basis, const PalsConstants& constants) {
        if (p.size() != num_params(basis)) throw ConfigError("parameter vector has wrong length");
        PalsParams out;
        out.basis = basis;
        out.constants = constants;
        const Index n = basis.size();
        const int k = shape_params_per_basis(basis.dim);
        out.alpha = p.head(n);
        out.beta.resize(n, k);
        out.gamma.resize(n, k);
        for (Index j = 0; j < n; ++j)
            for (int a = 0; a < k; ++a) {
                out.beta(j, a) = p[n + j * k + a];
                out.gamma(j, a) = p[n + n * k + j * k + a];
            }
        return out;
    }

    /// Start point: alpha ~ U(-halfwidth, halfwidth) from `seed`, constant beta and gamma.
    static PalsParams initial(const BasisGrid& basis, const PalsConstants& constants,
                              std::uint64_t seed, double beta0, double gamma0,
                              double alpha_halfwidth = 0.02) {
        PalsParams out;
        out.basis = basis;
        out.constants = constants;
        const Index n = basis.size();
        const int k = shape_params_per_basis(basis.dim);
        Rng rng(seed);
        out.alpha.resize(n);
        for (Index j = 0; j < n; ++j) out.alpha[j] = rng.uniform(-alpha_halfwidth, alpha_halfwidth);
        out.beta = Mat::Constant(n, k, beta0);
        out.gamma = Mat::Constant(n, k, gamma0);
        return out;
    }

    /// Standard start: 2D beta=0.015, gamma=0.1; 3D beta=0.5, gamma=0.31.
    static PalsParams default_initial(const BasisGrid& basis, const PalsConstants& constants,
                                      std::uint64_t seed) {
        return basis.dim == 2 ? initial(basis, constants, seed, 0.015, 0.1)
                              : initial(basis, constants, seed, 0.5, 0.31);
    }
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace detail {

template <int D>
using VecD = Eigen::Matrix<double, D, 1>;
template <int D>
using MatD = Eigen::Matrix<double, D, D>;

template <int D>
struct BasisGeometry {
    VecD<D> center;
    MatD<D> dilation;
    // dR/dbeta_a then dR/dgamma_a for a < k.
    std::array<MatD<D>, D == 2 ? 2 : 6> ddilation;
    double weight;
    double dweight;
};

template <int D>
BasisGeometry<D> basis_geometry(const PalsParams& params, Index j) {
    BasisGeometry<D> g;
    const double mu = params.constants.mu;
    for (int a = 0; a < D; ++a) g.center[a] = params.basis.centers[static_cast<std::size_t>(j)][a];
    g.weight = sigma_h(params.alpha[j]);
    g.dweight = sigma_h_deriv(params.alpha[j]);
    if constexpr (D == 2) {
        const double b = params.beta(j, 0), gm = params.gamma(j, 0);
        g.dilation = stretch_slide_2d(b, gm, mu);
        const double e = std::exp(b), ei = std::exp(-b);
        g.ddilation[0] << mu * e, 0.0, 0.0, -mu * ei;
        g.ddilation[1] << 0.0, mu, 0.0, 0.0;
    } else {
        Eigen::Vector3d b = params.beta.row(j).transpose();
        Eigen::Vector3d gm = params.gamma.row(j).transpose();
        g.dilation = stretch_slide_3d(b, gm, mu);
        std::array<Eigen::Matrix3d, 3> s;
        for (int f = 0; f < 3; ++f) s[f] = shear_factor(f, b[f], gm[f]);
        for (int f = 0; f < 3; ++f) {
            std::array<Eigen::Matrix3d, 3> db = s, dg = s;
            db[f] = shear_factor_dbeta(f, b[f]);
            dg[f] = shear_factor_dgamma(f);
            g.ddilation[f] = mu * db[0] * db[1] * db[2];
            g.ddilation[3 + f] = mu * dg[0] * dg[1] * dg[2];
        }
    }
    return g;
}

template <int D>
VecD<D> grid_point(const GridSpec& grid, Index i) {
    const Point p = grid.point(i);
    VecD<D> v;
    for (int a = 0; a < D; ++a) v[a] = p[a];
    return v;
}

template <int D>
Vec eval_phi_impl(const PalsParams& params, const GridSpec& grid) {
    const Index npts = grid.num_points();
    std::vector<VecD<D>> pts(static_cast<std::size_t>(npts));
    for (Index i = 0; i < npts; ++i) pts[static_cast<std::size_t>(i)] = grid_point<D>(grid, i);
    Vec phi = Vec::Zero(npts);
    for (Index j = 0; j < params.num_basis(); ++j) {
        const auto g = basis_geometry<D>(params, j);
        for (Index i = 0; i < npts; ++i) {
            const VecD<D> u = g.dilation * (pts[static_cast<std::size_t>(i)] - g.center);
            phi[i] += g.weight * std::exp(-u.squaredNorm());
        }
    }
    return phi;
}

// Columns of d(phi)/dp, each row scaled by row_scale[i].
template <int D>
Mat jacobian_phi_impl(const PalsParams& params, const GridSpec& grid, const Vec& row_scale) {
    constexpr int k = D == 2 ? 1 : 3;
    const Index npts = grid.num_points();
    const Index n = params.num_basis();
    std::vector<VecD<D>> pts(static_cast<std::size_t>(npts));
    for (Index i = 0; i < npts; ++i) pts[static_cast<std::size_t>(i)] = grid_point<D>(grid, i);

    Mat jac = Mat::Zero(npts, params.num_params());
    for (Index j = 0; j < n; ++j) {
        const auto g = basis_geometry<D>(params, j);
        double* col_alpha = jac.col(j).data();
        std::array<double*, 2 * k> col_shape;
        for (int a = 0; a < k; ++a) {
            col_shape[a] = jac.col(n + j * k + a).data();
            col_shape[k + a] = jac.col(n + n * k + j * k + a).data();
        }
        for (Index i = 0; i < npts; ++i) {
            const VecD<D> x = pts[static_cast<std::size_t>(i)] - g.center;
            const VecD<D> u = g.dilation * x;
            const double psi = std::exp(-u.squaredNorm());
            if (psi == 0.0) continue;
            const double s = row_scale[i];
            col_alpha[i] = s * g.dweight * psi;
            // d psi / d theta = -2 psi u^T (dR/dtheta) x
            const double common = -2.0 * s * g.weight * psi;
            for (int q = 0; q < 2 * k; ++q) col_shape[q][i] = common * u.dot(g.ddilation[q] * x);
        }
    }
    return jac;
}

inline void check_setup(const PalsParams& params, const GridSpec& grid) {
    if (params.dim() != grid.ndim()) throw ConfigError("basis and grid dimensions differ");
    if (params.alpha.size() != params.num_basis()) throw ConfigError("alpha has wrong length");
    if (!params.pack().allFinite()) throw NumericError("non-finite PaLS parameter");
}

inline void check_bounds(const ContrastBounds& bounds, const GridSpec& grid) {
    if (!(bounds.high.grid() == grid) || !(bounds.low.grid() == grid))
        throw ConfigError("contrast bounds live on a different grid");
}

} // namespace detail

inline ScalarField eval_phi(const PalsParams& params, const GridSpec& grid) {
    detail::check_setup(params, grid);
    Vec phi = grid.ndim() == 2 ? detail::eval_phi_impl<2>(params, grid)
                               : detail::eval_phi_impl<3>(params, grid);
    return ScalarField(grid, std::move(phi));
}

/// Image synthesis from an already evaluated level set.
inline ScalarField synthesize(const ScalarField& phi, const ContrastBounds& bounds,
                              const PalsConstants& constants) {
    detail::check_bounds(bounds, phi.grid());
    Vec f(phi.size());
    for (Index i = 0; i < phi.size(); ++i) {
        const double t = transition(phi[i] - constants.c, constants.w);
        f[i] = bounds.high[i] * t + bounds.low[i] * (1.0 - t);
    }
    return ScalarField(phi.grid(), std::move(f));
}

inline ScalarField eval_f(const PalsParams& params, const ContrastBounds& bounds,
                          const GridSpec& grid) {
    return synthesize(eval_phi(params, grid), bounds, params.constants);
}

/// d phi / d p, N_pts x num_params, column order as PalsParams::pack.
inline Mat jacobian_phi(const PalsParams& params, const GridSpec& grid) {
    detail::check_setup(params, grid);
    const Vec ones = Vec::Ones(grid.num_points());
    return grid.ndim() == 2 ? detail::jacobian_phi_impl<2>(params, grid, ones)
                            : detail::jacobian_phi_impl<3>(params, grid, ones);
}

/// d f / d p = (C_H - C_L) T_w'(phi - c) d phi / d p.
inline Mat jacobian_f(const PalsParams& params, const ContrastBounds& bounds, const GridSpec& grid,
                      const ScalarField* phi_in = nullptr) {
    detail::check_setup(params, grid);
    detail::check_bounds(bounds, grid);
    const ScalarField phi = phi_in ? *phi_in : eval_phi(params, grid);
    Vec scale(grid.num_points());
    for (Index i = 0; i < scale.size(); ++i)
        scale[i] = (bounds.high[i] - bounds.low[i]) *
                   transition_deriv(phi[i] - params.constants.c, params.constants.w);
    return grid.ndim() == 2 ? detail::jacobian_phi_impl<2>(params, grid, scale)
                            : detail::jacobian_phi_impl<3>(params, grid, scale);
}

struct LevelSetEval {
    ScalarField phi;
    ScalarField f;
    Mat jac_f; // empty unless requested
};

inline LevelSetEval evaluate(const PalsParams& params, const ContrastBounds& bounds,
                             const GridSpec& grid, bool with_jacobian) {
    LevelSetEval out;
    out.phi = eval_phi(params, grid);
    out.f = synthesize(out.phi, bounds, params.constants);
    if (with_jacobian) out.jac_f = jacobian_f(params, bounds, grid, &out.phi);
    return out;
}

// ---------------------------------------------------------------------------
// Geometry of the c-level set
// ---------------------------------------------------------------------------

/// Radius of the circular c-level set of one ABF with beta = gamma = 0;
/// nullopt when sigma_h(alpha) <= c (empty level set).
inline std::optional<double> level_set_radius(double alpha, const PalsConstants& k) {
    const double s = sigma_h(alpha);
    if (s < k.c) return std::nullopt;
    if (s == k.c) return 0.0;
    return std::sqrt(std::log(s / k.c)) / k.mu;
}

/// Inverse of level_set_radius: alpha = 2 atanh(c exp(mu^2 tau^2)).
inline double alpha_for_radius(double tau, const PalsConstants& k) {
    const double s = k.c * std::exp(k.mu * k.mu * tau * tau);
    if (!(s < 1.0)) throw ConfigError("radius not representable by a single ABF");
    return 2.0 * std::atanh(s);
}

using Mask = std::vector<std::uint8_t>;

inline Mask extract_c_level(const ScalarField& phi, double c) {
    Mask m(static_cast<std::size_t>(phi.size()));
    for (Index i = 0; i < phi.size(); ++i) m[static_cast<std::size_t>(i)] = phi[i] >= c ? 1 : 0;
    return m;
}

inline Index mask_count(const Mask& m) {
    Index n = 0;
    for (auto v : m) n += v;
    return n;
}

/// Area in physical units of the true pixels of a 2D mask (one cell per grid point).
inline double mask_area(const Mask& m, const GridSpec& grid) {
    double cell = 1.0;
    for (int a = 0; a < grid.ndim(); ++a) cell *= grid.spacing(a);
    return static_cast<double>(mask_count(m)) * cell;
}

// ---------------------------------------------------------------------------
// Legacy RBF model
// ---------------------------------------------------------------------------

/// Legacy RBF level set: phi = sum_j alpha_j exp(-beta_j |r - chi_j|^2), with
/// centers optimized. Packed as [alpha (N); beta (N); chi (N*d, basis-major)].
/// The scalar dilation multiplies the squared distance, so a single RBF has a
/// circular c-level set of radius^2 = ln(alpha/c) / beta.
struct RbfPalsParams {
    Vec alpha;
    Vec beta;
    Mat chi; // N x d
    double epsilon = 0.05;
    double c = 0.01;

    Index num_basis() const { return alpha.size(); }
    int dim() const { return static_cast<int>(chi.cols()); }
    Index num_params() const { return num_basis() * (2 + dim()); }

    Vec pack() const {
        const Index n = num_basis();
        const int d = dim();
        Vec p(num_params());
        p.head(n) = alpha;
        p.segment(n, n) = beta;
        for (Index j = 0; j < n; ++j)
            for (int a = 0; a < d; ++a) p[2 * n + j * d + a] = chi(j, a);
        return p;
    }

    static RbfPalsParams unpack(const Vec& p, Index n, int d, double epsilon, double c) {
        if (p.size() != n * (2 + d)) throw ConfigError("RBF parameter vector has wrong length");
        RbfPalsParams out;
        out.alpha = p.head(n);
        out.beta = p.segment(n, n);
        out.chi.resize(n, d);
        for (Index j = 0; j < n; ++j)
            for (int a = 0; a < d; ++a) out.chi(j, a) = p[2 * n + j * d + a];
        out.epsilon = epsilon;
        out.c = c;
        return out;
    }
};

inline ScalarField eval_phi_legacy(const RbfPalsParams& params, const GridSpec& grid) {
    if (params.dim() != grid.ndim()) throw ConfigError("RBF centers and grid dimensions differ");
    const int d = grid.ndim();
    Vec phi = Vec::Zero(grid.num_points());
    for (Index i = 0; i < grid.num_points(); ++i) {
        const Point r = grid.point(i);
        double s = 0.0;
        for (Index j = 0; j < params.num_basis(); ++j) {
            double dist2 = 0.0;
            for (int a = 0; a < d; ++a) {
                const double x = r[a] - params.chi(j, a);
                dist2 += x * x;
            }
            s += params.alpha[j] * std::exp(-params.beta[j] * dist2);
        }
        phi[i] = s;
    }
    return ScalarField(grid, std::move(phi));
}

/// f = f_O H_eps(phi - c) + f_B (1 - H_eps(phi - c)), H_eps = T_eps.
inline ScalarField eval_f_legacy(const RbfPalsParams& params, double f_object,
                                 double f_background, const GridSpec& grid) {
    const ScalarField phi = eval_phi_legacy(params, grid);
    Vec f(phi.size());
    for (Index i = 0; i < phi.size(); ++i) {
        const double h = transition(phi[i] - params.c, params.epsilon);
        f[i] = f_object * h + f_background * (1.0 - h);
    }
    return ScalarField(grid, std::move(f));
}

inline Mat jacobian_f_legacy(const RbfPalsParams& params, double f_object, double f_background,
                             const GridSpec& grid) {
    const ScalarField phi = eval_phi_legacy(params, grid);
    const Index n = params.num_basis();
    const int d = grid.ndim();
    Mat jac = Mat::Zero(grid.num_points(), params.num_params());
    for (Index i = 0; i < grid.num_points(); ++i) {
        const Point r = grid.point(i);
        const double s = (f_object - f_background) * transition_deriv(phi[i] - params.c, params.epsilon);
        for (Index j = 0; j < n; ++j) {
            double dist2 = 0.0;
            for (int a = 0; a < d; ++a) {
                const double x = r[a] - params.chi(j, a);
                dist2 += x * x;
            }
            const double psi = std::exp(-params.beta[j] * dist2);
            jac(i, j) = s * psi;
            jac(i, n + j) = -s * params.alpha[j] * dist2 * psi;
            for (int a = 0; a < d; ++a)
                jac(i, 2 * n + j * d + a) =
                    s * 2.0 * params.alpha[j] * params.beta[j] * (r[a] - params.chi(j, a)) * psi;
        }
    }
    return jac;
}

} // namespace palentir
