#pragma once

// Trust-region Levenberg-Marquardt for min_p 1/2 ||r(p)||^2.
//
// Each iteration solves (J^T J + lambda I) delta = -J^T r. The gain ratio
// (actual / predicted reduction) drives lambda: below 0.25 the region shrinks
// (lambda grows), above 0.75 it expands. Only steps that lower ||r||^2 are taken.
// Each iteration also probes one smaller and one larger lambda and keeps the
// trial with the lowest residual, which helps on the long flat stretches that
// level-set fits tend to produce.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "palentir/error.hpp"
#include "palentir/fields.hpp"

namespace palentir {

struct NllsProblem {
    std::function<Vec(const Vec&)> residual;
    std::function<Mat(const Vec&)> jacobian;
    Vec p0;
};

enum class StopReason { decrease, noise_floor, max_iter, step_too_small };

inline std::string to_string(StopReason r) {
    switch (r) {
    case StopReason::decrease: return "decrease";
    case StopReason::noise_floor: return "noise-floor";
    case StopReason::max_iter: return "max-iter";
    case StopReason::step_too_small: return "step-too-small";
    }
    return "?";
}

struct IterationInfo {
    int iteration = 0;
    double residual_sq = 0.0;
    double lambda = 0.0;
    bool accepted = false;
    double gain_ratio = 0.0;  // actual / predicted reduction of the trial step
    double step_norm = 0.0;
};

struct SolveOptions {
    double tol_decrease = 1e-3; // relative drop of ||r||^2 between accepted steps
    std::optional<double> noise_norm_sq;
    int max_iter = 10000;
    // lambda_0 = lambda_init * max diag(J^T J)
    double lambda_init = 1e-3;
    double shrink_threshold = 0.25;
    double expand_threshold = 0.75;
    double shrink_factor = 4.0; // lambda *= shrink_factor when the region shrinks
    double expand_factor = 3.0; // lambda /= expand_factor when it expands
    // > 1: every iteration also tries lambda / lambda_search and lambda * lambda_search
    // and keeps whichever trial step lowers ||r||^2 most. 0 disables.
    double lambda_search = 4.0;
    double lambda_min = 1e-14;
    double lambda_max = 1e16;
    double min_step = 1e-12; // relative to ||p|| + min_step
    std::optional<double> max_step_norm;
    bool marquardt_scaling = false; // damp with lambda diag(J^T J) instead of lambda I
    bool record_cond = false;
    bool keep_iterates = false;
    int fd_check_columns = 0; // spot finite-difference check of J at p0
    std::function<void(const IterationInfo&)> on_iteration;

    void validate() const {
        if (!(tol_decrease >= 0.0)) throw ConfigError("solver: tol_decrease must be >= 0");
        if (max_iter < 1) throw ConfigError("solver: max_iter must be >= 1");
        if (!(lambda_init > 0.0)) throw ConfigError("solver: lambda_init must be positive");
        if (!(shrink_factor > 1.0) || !(expand_factor > 1.0))
            throw ConfigError("solver: trust-region factors must exceed 1");
        if (!(shrink_threshold < expand_threshold)) throw ConfigError("solver: thresholds out of order");
        if (!(lambda_search == 0.0 || lambda_search > 1.0))
            throw ConfigError("solver: lambda_search must be 0 or exceed 1");
        if (!(lambda_min > 0.0 && lambda_min <= lambda_max)) throw ConfigError("solver: bad lambda range");
        if (noise_norm_sq && *noise_norm_sq < 0.0) throw ConfigError("solver: noise_norm_sq must be >= 0");
        if (max_step_norm && !(*max_step_norm > 0.0)) throw ConfigError("solver: max_step_norm must be positive");
    }
};

struct SolveReport {
    int iterations = 0; // attempted steps
    int accepted = 0;
    std::vector<double> residual_sq; // index 0 = start, then one per accepted step
    std::vector<double> lambda;      // lambda used for each entry of residual_sq
    std::vector<double> cond;        // filled when record_cond
    std::vector<Vec> iterates;       // filled when keep_iterates
    StopReason reason = StopReason::max_iter;
    Vec p;
    std::vector<std::string> warnings;

    double final_residual_sq() const { return residual_sq.empty() ? 0.0 : residual_sq.back(); }

    void write_csv(const std::string& path) const {
        std::FILE* fp = std::fopen(path.c_str(), "w");
        if (!fp) throw IoError("cannot write " + path);
        std::fprintf(fp, "iteration,residual_sq,lambda,cond\n");
        for (std::size_t k = 0; k < residual_sq.size(); ++k) {
            std::fprintf(fp, "%zu,%.17g,%.17g,", k, residual_sq[k], lambda[k]);
            if (k < cond.size()) std::fprintf(fp, "%.17g", cond[k]);
            std::fprintf(fp, "\n");
        }
        std::fclose(fp);
    }
};

/// sigma_max / sigma_min by SVD; +inf when sigma_min < eps * sigma_max * max(m, n).
inline double condition_number(const Mat& j) {
    if (j.size() == 0) throw ConfigError("condition_number: empty matrix");
    Eigen::BDCSVD<Mat> svd(j);
    const Vec& s = svd.singularValues();
    const double smax = s[0];
    const double smin = s[s.size() - 1];
    if (!(smax > 0.0)) throw NumericError("condition_number: zero matrix");
    const double tol = std::numeric_limits<double>::epsilon() * smax *
                       static_cast<double>(std::max(j.rows(), j.cols()));
    if (j.rows() < j.cols() || smin < tol) return std::numeric_limits<double>::infinity();
    return smax / smin;
}

namespace detail {

// (H + lambda I) x = -g; eigen-shifted fallback when Cholesky fails.
inline Vec damped_step(const Mat& h, const Vec& g, double lambda, bool scaled = false) {
    Mat a = h;
    if (scaled)
        a.diagonal().array() += lambda * h.diagonal().array().max(1e-12 * h.diagonal().maxCoeff());
    else
        a.diagonal().array() += lambda;
    Eigen::LLT<Mat> llt(a);
    if (llt.info() == Eigen::Success) {
        Vec x = llt.solve(-g);
        if (x.allFinite()) return x;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    Vec ev = es.eigenvalues().array() + lambda;
    const double floor = std::max(1e-300, 1e-14 * std::abs(ev.maxCoeff()));
    ev = ev.cwiseMax(floor);
    return -(es.eigenvectors() * ((es.eigenvectors().transpose() * g).array() / ev.array()).matrix());
}

inline Mat gram(const Mat& j) {
    Mat h = Mat::Zero(j.cols(), j.cols());
    h.selfadjointView<Eigen::Lower>().rankUpdate(j.transpose());
    h.triangularView<Eigen::StrictlyUpper>() = h.transpose();
    return h;
}

} // namespace detail

inline SolveReport solve(const NllsProblem& problem, const SolveOptions& opt = {}) {
    opt.validate();
    if (!problem.residual || !problem.jacobian) throw ConfigError("solver: missing callbacks");
    if (problem.p0.size() < 1) throw ConfigError("solver: empty parameter vector");
    if (!problem.p0.allFinite()) throw NumericError("solver: non-finite initial parameters");

    SolveReport rep;
    Vec p = problem.p0;
    Vec r = problem.residual(p);
    if (r.size() < 1) throw ConfigError("solver: residual has no entries");
    if (!r.allFinite()) throw NumericError("solver: non-finite residual at p0");
    double fsq = r.squaredNorm();

    Mat j = problem.jacobian(p);
    if (j.rows() != r.size() || j.cols() != p.size())
        throw ConfigError("solver: Jacobian shape does not match residual/parameters");
    if (!j.allFinite()) throw NumericError("solver: non-finite Jacobian at p0");

    if (opt.fd_check_columns > 0) {
        const Index ncheck = std::min<Index>(opt.fd_check_columns, p.size());
        for (Index t = 0; t < ncheck; ++t) {
            const Index col = (t * p.size()) / ncheck;
            const double h = 1e-6 * std::max(1.0, std::abs(p[col]));
            Vec pp = p, pm = p;
            pp[col] += h;
            pm[col] -= h;
            const Vec fd = (problem.residual(pp) - problem.residual(pm)) / (2.0 * h);
            const double err = (fd - j.col(col)).norm() / std::max(1e-12, fd.norm());
            if (err > 1e-4)
                rep.warnings.push_back("jacobian column " + std::to_string(col) +
                                       " disagrees with finite differences (rel " + std::to_string(err) + ")");
        }
    }

    Mat h = detail::gram(j);
    Vec g = j.transpose() * r;
    double lambda = opt.marquardt_scaling ? opt.lambda_init
                                          : std::max(opt.lambda_min, opt.lambda_init * h.diagonal().maxCoeff());

    auto record = [&]() {
        rep.residual_sq.push_back(fsq);
        rep.lambda.push_back(lambda);
        if (opt.record_cond) rep.cond.push_back(condition_number(j));
        if (opt.keep_iterates) rep.iterates.push_back(p);
    };
    record();

    auto at_floor = [&]() { return opt.noise_norm_sq && fsq <= *opt.noise_norm_sq; };
    if (at_floor()) {
        rep.reason = StopReason::noise_floor;
        rep.p = p;
        return rep;
    }

    // Residual at p + step; empty when the trial leaves the model's valid range.
    auto trial_residual = [&](const Vec& step) -> Vec {
        const Vec t = p + step;
        if (!t.allFinite()) return Vec();
        try {
            Vec rt = problem.residual(t);
            if (rt.size() == r.size() && rt.allFinite()) return rt;
        } catch (const NumericError&) {
        }
        return Vec();
    };
    auto sq = [](const Vec& v) { return v.size() ? v.squaredNorm() : std::numeric_limits<double>::infinity(); };

    rep.reason = StopReason::max_iter;
    while (rep.iterations < opt.max_iter) {
        ++rep.iterations;
        auto make_step = [&](double l) {
            Vec st = detail::damped_step(h, g, l, opt.marquardt_scaling);
            if (opt.max_step_norm) {
                const double sn = st.norm();
                if (sn > *opt.max_step_norm) st *= *opt.max_step_norm / sn;
            }
            return st;
        };
        Vec step = make_step(lambda);
        if (step.norm() <= opt.min_step * (p.norm() + opt.min_step)) {
            rep.reason = StopReason::step_too_small;
            break;
        }
        Vec rt = trial_residual(step);
        double lambda_hi = lambda; // largest damping tried this iteration
        if (opt.lambda_search > 0.0) {
            for (double l : {lambda / opt.lambda_search, lambda * opt.lambda_search}) {
                l = std::clamp(l, opt.lambda_min, opt.lambda_max);
                if (l == lambda) continue;
                lambda_hi = std::max(lambda_hi, l);
                Vec st = make_step(l);
                Vec rs = trial_residual(st);
                if (sq(rs) < sq(rt)) {
                    step = std::move(st);
                    rt = std::move(rs);
                    lambda = l;
                }
            }
        }
        const double ft = sq(rt);
        // predicted reduction of ||r||^2 under the linear model
        const double pred = -(2.0 * step.dot(g) + step.dot(h * step));
        const double actual = fsq - ft;
        const double ratio = pred > 0.0 && std::isfinite(ft) ? actual / pred : -1.0;
        if (std::isfinite(ft) && actual > 0.0) {
            const double prev = fsq;
            p += step;
            r = std::move(rt);
            fsq = ft;
            j = problem.jacobian(p);
            if (!j.allFinite()) throw NumericError("solver: non-finite Jacobian");
            h = detail::gram(j);
            g = j.transpose() * r;
            ++rep.accepted;
            if (ratio > opt.expand_threshold) lambda = std::max(opt.lambda_min, lambda / opt.expand_factor);
            else if (ratio < opt.shrink_threshold) lambda = std::min(opt.lambda_max, lambda * opt.shrink_factor);
            record();
            if (opt.on_iteration) opt.on_iteration({rep.iterations, fsq, lambda, true, ratio, step.norm()});
            if (at_floor()) {
                rep.reason = StopReason::noise_floor;
                break;
            }
            if ((prev - fsq) / prev < opt.tol_decrease) {
                rep.reason = StopReason::decrease;
                break;
            }
        } else {
            if (lambda_hi >= opt.lambda_max) {
                rep.reason = StopReason::step_too_small;
                break;
            }
            lambda = std::min(opt.lambda_max, lambda_hi * opt.shrink_factor);
            if (opt.on_iteration) opt.on_iteration({rep.iterations, fsq, lambda, false, ratio, step.norm()});
        }
    }
    rep.p = p;
    return rep;
}

} // namespace palentir
