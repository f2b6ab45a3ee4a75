#pragma once

// Frequency-domain diffuse optical tomography on a rectangle.
//
//   -div(D grad eta) + (f + i omega/nu) eta = g
//
// Discretized with the 5-point stencil on the vertex grid. Axis 0 runs
// bottom -> top, axis 1 runs left -> right. Top and bottom rows are homogeneous
// Dirichlet (rows reduced to identity, couplings eliminated). The left and right
// columns carry the Robin condition D d(eta)/dn + kappa eta = 0 via a half-cell
// balance; every row is divided by hx*hy so interior rows read
// diag = 2D/hx^2 + 2D/hy^2 + f, off-diagonals -D/h^2, and the matrix stays
// symmetric. Absorption therefore enters as vol_i * f_i on the diagonal with
// vol_i = 1 (interior), 1/2 (Robin edge), 0 (Dirichlet).
//
// Sources sit one node inside the right edge; detectors on the left edge.
// Psi = C^T A^{-1} B is m_d x m_s; data = vec(Psi), column-major (source-major).

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "palentir/forward/model.hpp"

namespace palentir {

struct DotOptions {
    double diffusion = 0.03;
    double omega = 0.0;
    double nu = 1.0;
    double robin = 0.5;
    Index n_sources = 32;
    Index n_detectors = 32;
};

class Dot2dModel final : public ForwardModel {
public:
    using Complex = std::complex<double>;
    using CSparse = Eigen::SparseMatrix<Complex>;
    using RSparse = Eigen::SparseMatrix<double>;

    Dot2dModel(const GridSpec& grid, DotOptions opt = {}) : grid_(grid), opt_(opt) {
        if (grid_.ndim() != 2) throw ConfigError("dot: 2D grids only");
        if (!(opt_.diffusion > 0.0)) throw ConfigError("dot: diffusion must be positive");
        if (!(opt_.nu > 0.0)) throw ConfigError("dot: nu must be positive");
        if (opt_.robin < 0.0) throw ConfigError("dot: robin coefficient must be >= 0");
        const Index ny = grid_.dim(0), nx = grid_.dim(1);
        if (nx < 3 || ny < 3) throw ConfigError("dot: grid too small");
        if (opt_.n_sources < 1 || opt_.n_detectors < 1) throw ConfigError("dot: need sources and detectors");
        if (opt_.n_sources > ny - 2 || opt_.n_detectors > ny - 2)
            throw ConfigError("dot: more sources/detectors than interior rows");

        volume_.resize(grid_.num_points());
        for (Index i = 0; i < ny; ++i)
            for (Index j = 0; j < nx; ++j) {
                const Index n = i * nx + j;
                if (i == 0 || i == ny - 1) volume_[n] = 0.0;
                else if (j == 0 || j == nx - 1) volume_[n] = 0.5;
                else volume_[n] = 1.0;
            }
        const double hx = grid_.spacing(1), hy = grid_.spacing(0);
        for (Index k = 0; k < opt_.n_sources; ++k) source_nodes_.push_back(spread(k, opt_.n_sources) * nx + (nx - 2));
        for (Index k = 0; k < opt_.n_detectors; ++k) detector_nodes_.push_back(spread(k, opt_.n_detectors) * nx);

        const double inv_cell = 1.0 / (hx * hy);
        sources_ = Mat::Zero(grid_.num_points(), opt_.n_sources);
        for (Index k = 0; k < opt_.n_sources; ++k) sources_(source_nodes_[static_cast<std::size_t>(k)], k) = inv_cell;
        detectors_ = Mat::Zero(grid_.num_points(), opt_.n_detectors);
        for (Index k = 0; k < opt_.n_detectors; ++k) detectors_(detector_nodes_[static_cast<std::size_t>(k)], k) = 1.0;
    }

    std::string name() const override { return "dot2d"; }
    Index image_len() const override { return grid_.num_points(); }
    Index data_len() const override { return measurements() * (complex_data() ? 2 : 1); }
    std::vector<Index> data_dims() const override {
        if (complex_data()) return {2, opt_.n_sources, opt_.n_detectors};
        return {opt_.n_sources, opt_.n_detectors};
    }

    Index measurements() const { return opt_.n_sources * opt_.n_detectors; }
    bool complex_data() const { return opt_.omega != 0.0; }
    const DotOptions& options() const { return opt_; }
    const Vec& volume_weights() const { return volume_; }
    const std::vector<Index>& source_nodes() const { return source_nodes_; }
    const std::vector<Index>& detector_nodes() const { return detector_nodes_; }
    const Mat& sources() const { return sources_; }
    const Mat& detectors() const { return detectors_; }

    /// System operator A(f) (complex; imaginary part only when omega != 0).
    CSparse assemble(const Vec& fabs) const {
        check_image(fabs);
        const Index ny = grid_.dim(0), nx = grid_.dim(1);
        const double hx = grid_.spacing(1), hy = grid_.spacing(0);
        const double d = opt_.diffusion;
        const double cx = d / (hx * hx), cy = d / (hy * hy);
        const Complex iw(0.0, opt_.omega / opt_.nu);
        std::vector<Eigen::Triplet<Complex>> trip;
        trip.reserve(static_cast<std::size_t>(grid_.num_points() * 5));
        auto dirichlet = [&](Index i) { return i == 0 || i == ny - 1; };
        for (Index i = 0; i < ny; ++i)
            for (Index j = 0; j < nx; ++j) {
                const Index n = i * nx + j;
                if (dirichlet(i)) {
                    trip.emplace_back(n, n, 1.0);
                    continue;
                }
                const double v = volume_[n];
                Complex diag = v * (fabs[n] + iw);
                // x-direction neighbours (full-width faces)
                for (Index dj : {-1, 1}) {
                    const Index jj = j + dj;
                    if (jj < 0 || jj >= nx) continue;
                    diag += cx;
                    trip.emplace_back(n, i * nx + jj, -cx);
                }
                // y-direction neighbours: face width scales with the cell's x extent
                for (Index di : {-1, 1}) {
                    const Index ii = i + di;
                    diag += v * cy;
                    if (!dirichlet(ii)) trip.emplace_back(n, ii * nx + j, -v * cy);
                }
                if (j == 0 || j == nx - 1) diag += opt_.robin / hx;
                trip.emplace_back(n, n, diag);
            }
        CSparse a(grid_.num_points(), grid_.num_points());
        a.setFromTriplets(trip.begin(), trip.end());
        return a;
    }

    /// Transfer function Psi = C^T A^{-1} B (m_d x m_s).
    Eigen::MatrixXcd transfer(const Vec& fabs) const {
        Solved s = solve_all(fabs, false);
        return detectors_.transpose().cast<Complex>() * s.fields;
    }

    Vec apply(const Vec& f) const override { return stack(transfer(f)); }

    Mat jacobian_times(const Vec& f, const Mat& jf) const override {
        if (jf.rows() != image_len()) throw ConfigError("dot: Jacobian row count mismatch");
        const Eigen::MatrixXcd g = sensitivity(f);
        const Index m = measurements();
        if (!complex_data()) return g.real() * jf;
        Mat out(2 * m, jf.cols());
        out.topRows(m) = g.real() * jf;
        out.bottomRows(m) = g.imag() * jf;
        return out;
    }

    /// d vec(Psi) / d f (m x N_pts): -vol_i [A^-T C]_{i,d} [A^-1 B]_{i,q}.
    Eigen::MatrixXcd sensitivity(const Vec& fabs) const {
        Solved s = solve_all(fabs, true);
        const Index m = measurements(), npts = grid_.num_points();
        Eigen::MatrixXcd g(m, npts);
        for (Index q = 0; q < opt_.n_sources; ++q)
            for (Index d = 0; d < opt_.n_detectors; ++d) {
                const Index row = q * opt_.n_detectors + d;
                for (Index i = 0; i < npts; ++i)
                    g(row, i) = -volume_[i] * s.adjoint(i, d) * s.fields(i, q);
            }
        return g;
    }

    /// Stacks vec(Psi) into the real data layout used by apply().
    Vec stack(const Eigen::MatrixXcd& psi) const {
        const Index m = measurements();
        Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(psi.data(), m);
        if (!complex_data()) return v.real();
        Vec out(2 * m);
        out.head(m) = v.real();
        out.tail(m) = v.imag();
        return out;
    }

private:
    struct Solved {
        Eigen::MatrixXcd fields;  // A^{-1} B
        Eigen::MatrixXcd adjoint; // A^{-T} C
    };

    Solved solve_all(const Vec& fabs, bool with_adjoint) const {
        const CSparse a = assemble(fabs);
        Eigen::SparseLU<CSparse> lu;
        lu.analyzePattern(a);
        lu.factorize(a);
        if (lu.info() != Eigen::Success) throw NumericError("dot: singular system operator");
        Solved s;
        s.fields = lu.solve(sources_.cast<Complex>());
        // A is (complex) symmetric, so A^{-T} C = A^{-1} C.
        if (with_adjoint) s.adjoint = lu.solve(detectors_.cast<Complex>());
        if (!s.fields.allFinite()) throw NumericError("dot: non-finite forward solution");
        return s;
    }

    // k-th of n rows spread over the interior rows 1 .. ny-2.
    Index spread(Index k, Index n) const {
        const Index lo = 1, hi = grid_.dim(0) - 2;
        if (n == 1) return (lo + hi) / 2;
        return lo + static_cast<Index>(std::llround(static_cast<double>(k) * static_cast<double>(hi - lo) /
                                                    static_cast<double>(n - 1)));
    }

    GridSpec grid_;
    DotOptions opt_;
    Vec volume_;
    std::vector<Index> source_nodes_;
    std::vector<Index> detector_nodes_;
    Mat sources_;
    Mat detectors_;
};

} // namespace palentir
