#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "palentir/fields.hpp"
#include "palentir/pals.hpp"
#include "palentir/solver.hpp"

namespace palentir {

namespace detail {
inline void check_same_shape(const ScalarField& a, const ScalarField& b) {
    if (a.grid().dims() != b.grid().dims()) throw ConfigError("metrics: shape mismatch");
}
} // namespace detail

inline double mse(const ScalarField& ref, const ScalarField& sub) {
    detail::check_same_shape(ref, sub);
    return (ref.values() - sub.values()).squaredNorm() / static_cast<double>(ref.size());
}

/// 20 log10(max(ref) / sqrt(mse)); +inf when the images agree exactly.
inline double psnr(const ScalarField& ref, const ScalarField& sub) {
    const double m = mse(ref, sub);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(ref.max() / std::sqrt(m));
}

/// 20 log10(||ref|| / ||sub - ref||).
inline double snr(const ScalarField& ref, const ScalarField& sub) {
    detail::check_same_shape(ref, sub);
    const double e = (sub.values() - ref.values()).norm();
    if (e == 0.0) return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(ref.values().norm() / e);
}

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

namespace detail {

// Gaussian-weighted local mean along one axis; the window is clipped at the
// border and renormalized, which for a separable kernel equals the clipped
// and renormalized full window.
inline Vec blur_axis(const Vec& v, const GridSpec& g, int axis, const std::vector<double>& w) {
    const Index half = static_cast<Index>(w.size() / 2);
    Index stride = 1;
    for (int a = g.ndim() - 1; a > axis; --a) stride *= g.dim(a);
    const Index len = g.dim(axis);
    const Index outer = g.num_points() / (len * stride);
    Vec out(v.size());
    for (Index o = 0; o < outer; ++o)
        for (Index s = 0; s < stride; ++s) {
            const Index base = o * len * stride + s;
            for (Index k = 0; k < len; ++k) {
                double acc = 0.0, wsum = 0.0;
                for (Index t = std::max<Index>(0, k - half); t <= std::min(len - 1, k + half); ++t) {
                    const double wt = w[static_cast<std::size_t>(t - k + half)];
                    acc += wt * v[base + t * stride];
                    wsum += wt;
                }
                out[base + k * stride] = acc / wsum;
            }
        }
    return out;
}

inline Vec local_mean(const Vec& v, const GridSpec& g, const std::vector<double>& w) {
    Vec out = v;
    for (int a = 0; a < g.ndim(); ++a) out = blur_axis(out, g, a, w);
    return out;
}

inline std::vector<double> gaussian_window(const SsimOptions& o) {
    std::vector<double> w(static_cast<std::size_t>(o.window));
    const int h = o.window / 2;
    for (int i = -h; i <= h; ++i) w[static_cast<std::size_t>(i + h)] = std::exp(-0.5 * i * i / (o.sigma * o.sigma));
    return w;
}

} // namespace detail

/// Mean local SSIM with dynamic range L = max(ref) - min(ref).
inline double ssim(const ScalarField& ref, const ScalarField& sub, const SsimOptions& opt = {}) {
    detail::check_same_shape(ref, sub);
    if (opt.window < 1 || opt.window % 2 == 0) throw ConfigError("ssim: window must be odd");
    const Vec& x = ref.values();
    const Vec& y = sub.values();
    const bool xc = ref.max() == ref.min(), yc = sub.max() == sub.min();
    if (xc && yc && x[0] == y[0]) return 1.0;
    double range = ref.max() - ref.min();
    if (range == 0.0) range = std::max({std::abs(ref.max()), std::abs(sub.max()), sub.max() - sub.min()});
    const double c1 = (opt.k1 * range) * (opt.k1 * range);
    const double c2 = (opt.k2 * range) * (opt.k2 * range);
    const GridSpec& g = ref.grid();
    const auto w = detail::gaussian_window(opt);
    const Vec mx = detail::local_mean(x, g, w);
    const Vec my = detail::local_mean(y, g, w);
    const Vec sxx = detail::local_mean(x.cwiseProduct(x), g, w) - mx.cwiseProduct(mx);
    const Vec syy = detail::local_mean(y.cwiseProduct(y), g, w) - my.cwiseProduct(my);
    const Vec sxy = detail::local_mean(x.cwiseProduct(y), g, w) - mx.cwiseProduct(my);
    double total = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * sxy[i] + c2);
        const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (sxx[i] + syy[i] + c2);
        total += num / den;
    }
    return total / static_cast<double>(x.size());
}

struct MetricReport {
    std::string reference;
    std::string subject;
    double psnr_db = 0.0;
    double snr_db = 0.0;
    double ssim = 0.0;
    double mse = 0.0;
};

inline MetricReport compare(const ScalarField& ref, const ScalarField& sub, std::string ref_id = "reference",
                            std::string sub_id = "subject") {
    return {std::move(ref_id), std::move(sub_id), psnr(ref, sub), snr(ref, sub), ssim(ref, sub), mse(ref, sub)};
}

inline void write_metrics_csv(const std::vector<MetricReport>& rows, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw IoError("cannot write " + path);
    std::fprintf(fp, "reference,subject,psnr_db,snr_db,ssim,mse\n");
    for (const auto& r : rows)
        std::fprintf(fp, "%s,%s,%.17g,%.17g,%.17g,%.17g\n", r.reference.c_str(), r.subject.c_str(), r.psnr_db,
                     r.snr_db, r.ssim, r.mse);
    std::fclose(fp);
}

// ---------------------------------------------------------------------------
// Jacobian conditioning
// ---------------------------------------------------------------------------

struct ConditioningRow {
    double alpha = 0.0;
    double beta_rbf = 0.0;
    double cond_rbf = 0.0;
    double cond_palentir = 0.0;
};

/// Single basis at the grid center drawing a circle of radius `radius`. For each
/// RBF weight alpha in [alpha_min, alpha_max] the RBF dilation follows from
/// radius^2 = ln(alpha/c)/beta; the ABF is the unique alpha with beta = gamma = 0.
inline std::vector<ConditioningRow> conditioning_sweep_single_basis(double radius, double alpha_min,
                                                                     double alpha_max, int n_samples,
                                                                     const GridSpec& grid,
                                                                     const PalsConstants& k = PalsConstants::defaults_2d(),
                                                                     double epsilon = 0.05) {
    if (grid.ndim() != 2) throw ConfigError("condbench: 2D grids only");
    if (n_samples < 1) throw ConfigError("condbench: need at least one sample");
    if (!(alpha_min > k.c) || !(alpha_max >= alpha_min)) throw ConfigError("condbench: alpha range must exceed c");
    const double half = 0.5 * std::min(grid.extent(0).width(), grid.extent(1).width());
    if (!(radius > 0.0 && radius < half)) throw ConfigError("condbench: radius outside (0, extent/2)");
    k.validate();

    const Point center{0.5 * (grid.extent(0).lo + grid.extent(0).hi), 0.5 * (grid.extent(1).lo + grid.extent(1).hi), 0.0};

    PalsParams abf;
    abf.basis.dim = 2;
    abf.basis.centers = {center};
    abf.constants = k;
    abf.alpha = Vec::Constant(1, alpha_for_radius(radius, k));
    abf.beta = Mat::Zero(1, 1);
    abf.gamma = Mat::Zero(1, 1);
    const ContrastBounds unit = ContrastBounds::uniform(grid, 0.0, 1.0);
    const double cond_abf = condition_number(jacobian_f(abf, unit, grid));

    std::vector<ConditioningRow> rows;
    for (int s = 0; s < n_samples; ++s) {
        const double a = n_samples == 1 ? alpha_min
                                        : alpha_min + (alpha_max - alpha_min) * s / static_cast<double>(n_samples - 1);
        RbfPalsParams rbf;
        rbf.alpha = Vec::Constant(1, a);
        rbf.beta = Vec::Constant(1, std::log(a / k.c) / (radius * radius));
        rbf.chi = Mat(1, 2);
        rbf.chi << center[0], center[1];
        rbf.epsilon = epsilon;
        rbf.c = k.c;
        rows.push_back({a, rbf.beta[0], condition_number(jacobian_f_legacy(rbf, 1.0, 0.0, grid)), cond_abf});
    }
    return rows;
}

inline void write_conditioning_csv(const std::vector<ConditioningRow>& rows, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw IoError("cannot write " + path);
    std::fprintf(fp, "alpha,beta_rbf,cond_rbf,cond_palentir\n");
    for (const auto& r : rows) std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g\n", r.alpha, r.beta_rbf, r.cond_rbf, r.cond_palentir);
    std::fclose(fp);
}

/// cond(J) at every accepted iterate of a solve run with keep_iterates.
inline std::vector<double> conditioning_trace(const NllsProblem& problem, const SolveReport& report) {
    if (report.iterates.size() != report.residual_sq.size())
        throw ConfigError("conditioning_trace: solve report holds no iterates (enable keep_iterates)");
    std::vector<double> out;
    out.reserve(report.iterates.size());
    for (const Vec& p : report.iterates) out.push_back(condition_number(problem.jacobian(p)));
    return out;
}

struct AveragedTrace {
    std::vector<double> residual_norm; // mean ||F||_2
    std::vector<double> cond;
};

/// Pads every run to the longest one with its final value, then averages.
inline std::vector<double> padded_mean(const std::vector<std::vector<double>>& runs) {
    std::size_t len = 0;
    for (const auto& r : runs) {
        if (r.empty()) throw ConfigError("padded_mean: empty run");
        len = std::max(len, r.size());
    }
    std::vector<double> out(len, 0.0);
    for (const auto& r : runs)
        for (std::size_t i = 0; i < len; ++i) out[i] += i < r.size() ? r[i] : r.back();
    for (double& v : out) v /= static_cast<double>(runs.size());
    return out;
}

inline AveragedTrace average_traces(const std::vector<SolveReport>& reports,
                                    const std::vector<std::vector<double>>& conds) {
    if (reports.size() != conds.size()) throw ConfigError("average_traces: run count mismatch");
    std::vector<std::vector<double>> res;
    for (const auto& r : reports) {
        std::vector<double> v;
        for (double s : r.residual_sq) v.push_back(std::sqrt(s));
        res.push_back(std::move(v));
    }
    return {padded_mean(res), padded_mean(conds)};
}

inline void write_trace_csv(const AveragedTrace& t, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw IoError("cannot write " + path);
    std::fprintf(fp, "iteration,mean_residual_norm,mean_cond\n");
    for (std::size_t i = 0; i < t.residual_norm.size(); ++i)
        std::fprintf(fp, "%zu,%.17g,%.17g\n", i, t.residual_norm[i], i < t.cond.size() ? t.cond[i] : 0.0);
    std::fclose(fp);
}

} // namespace palentir
