#pragma once

// Outer contrast-bound loop and the windowed min/max bound update.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "palentir/bounds.hpp"
#include "palentir/forward/model.hpp"
#include "palentir/pals.hpp"
#include "palentir/solver.hpp"

namespace palentir {

enum class ExtremumMode { min, max };

namespace detail {

// Running extremum of width delta (clipped) along one axis, in place.
inline void window_pass(Vec& v, const GridSpec& g, int axis, Index half, ExtremumMode mode) {
    const int nd = g.ndim();
    Index stride = 1;
    for (int a = nd - 1; a > axis; --a) stride *= g.dim(a);
    const Index len = g.dim(axis);
    const Index outer = g.num_points() / (len * stride);
    std::vector<double> line(static_cast<std::size_t>(len));
    for (Index o = 0; o < outer; ++o)
        for (Index s = 0; s < stride; ++s) {
            const Index base = o * len * stride + s;
            for (Index k = 0; k < len; ++k) line[static_cast<std::size_t>(k)] = v[base + k * stride];
            for (Index k = 0; k < len; ++k) {
                const Index lo = std::max<Index>(0, k - half), hi = std::min(len - 1, k + half);
                double e = line[static_cast<std::size_t>(lo)];
                for (Index t = lo + 1; t <= hi; ++t) {
                    const double x = line[static_cast<std::size_t>(t)];
                    e = mode == ExtremumMode::max ? std::max(e, x) : std::min(e, x);
                }
                v[base + k * stride] = e;
            }
        }
}

} // namespace detail

/// Windowed extremum of f over a delta-wide box (clipped at the borders), without the skip rule.
inline ScalarField window_extremum(const ScalarField& f, Index delta, ExtremumMode mode) {
    if (delta < 1 || delta % 2 == 0) throw ConfigError("delta must be odd");
    Vec v = f.values();
    for (int a = 0; a < f.grid().ndim(); ++a) detail::window_pass(v, f.grid(), a, delta / 2, mode);
    return ScalarField(f.grid(), std::move(v));
}

/// One bound update: C_temp = windowed extremum, kept only where |1 - C_temp/C_prev| > eta.
inline ScalarField update_c(const ScalarField& f_hat, const ScalarField& c_prev, double eta, Index delta,
                            ExtremumMode mode) {
    if (!(f_hat.grid() == c_prev.grid())) throw ConfigError("update_c: grid mismatch");
    if (!(eta >= 0.0)) throw ConfigError("update_c: eta must be >= 0");
    const ScalarField temp = window_extremum(f_hat, delta, mode);
    ScalarField out = c_prev;
    for (Index n = 0; n < out.size(); ++n) {
        const double prev = c_prev[n];
        if (prev == 0.0) {
            out[n] = temp[n];
            continue;
        }
        if (std::abs(1.0 - temp[n] / prev) > eta) out[n] = temp[n];
    }
    return out;
}

struct Checkpoint {
    int outer_index = -1;
    Vec p;
    ContrastBounds bounds;
};

inline void write_checkpoint(const Checkpoint& ck, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory " + dir);
    write_vector(ck.p, dir + "/p.palf");
    write_field(ck.bounds.high, dir + "/c_high.palf");
    write_field(ck.bounds.low, dir + "/c_low.palf");
    nlohmann::json j;
    j["outer_index"] = ck.outer_index;
    j["num_params"] = ck.p.size();
    j["files"] = {{"p", "p.palf"}, {"c_high", "c_high.palf"}, {"c_low", "c_low.palf"}};
    std::ofstream os(dir + "/checkpoint.json");
    if (!os) throw IoError("cannot write checkpoint manifest in " + dir);
    os << j.dump(2) << "\n";
}

inline Checkpoint read_checkpoint(const std::string& dir) {
    std::ifstream is(dir + "/checkpoint.json");
    if (!is) throw IoError("missing checkpoint manifest in " + dir);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw IoError(std::string("malformed checkpoint manifest: ") + e.what());
    }
    Checkpoint ck;
    ck.outer_index = j.at("outer_index").get<int>();
    ck.p = read_vector(dir + "/" + j.at("files").at("p").get<std::string>());
    ck.bounds.high = read_field(dir + "/" + j.at("files").at("c_high").get<std::string>());
    ck.bounds.low = read_field(dir + "/" + j.at("files").at("c_low").get<std::string>());
    if (ck.p.size() != j.at("num_params").get<Index>()) throw IoError("checkpoint parameter count mismatch");
    return ck;
}

enum class ChangeForm { vector, scalar };

struct OuterLoopOptions {
    double rho = 1e-3;
    std::optional<double> varphi; // defaults to the solver noise floor when absent
    int k_max = 10;
    double eta = 0.05;
    Index delta = 29;
    double c_min = 0.0;
    double c_max = 1.0;
    ChangeForm change = ChangeForm::vector;
    bool warm_start = true;
    // false: stop as soon as the change drops below rho or ||F||^2 reaches varphi.
    // true: keep going while either test still holds (only k_max ends the loop early).
    bool literal_while = false;
    // Stop once ||F||^2 goes up and hand back the best pass. The bound update
    // only ever tightens, so a rising residual means it is eating into the fit.
    bool stop_on_increase = true;
    SolveOptions solve;
    std::string checkpoint_dir;
    std::function<void(int, const SolveReport&)> on_outer;

    void validate() const {
        if (k_max < 1) throw ConfigError("k_max must be >= 1");
        if (delta < 1 || delta % 2 == 0) throw ConfigError("delta must be odd");
        if (!(eta >= 0.0)) throw ConfigError("eta must be >= 0");
        if (!(rho >= 0.0)) throw ConfigError("rho must be >= 0");
        if (c_min > c_max) throw ConfigError("c_min must not exceed c_max");
        solve.validate();
    }
};

struct ReconstructResult {
    PalsParams params;
    ContrastBounds bounds;
    ScalarField phi;
    ScalarField f;
    std::vector<SolveReport> reports;
    std::vector<double> outer_residual_sq; // ||F^(k)||^2 for k = -1, 0, ...
    int outer_iterations = 0;             // number of bound updates performed
    int best_outer = -1;                  // pass whose state is returned
};

/// Inner problem: r(p) = M(f(p; bounds)) - d.
inline NllsProblem make_problem(const ForwardModel& model, const Vec& data, const PalsParams& start,
                                const ContrastBounds& bounds, const GridSpec& grid) {
    if (data.size() != model.data_len()) throw ConfigError("data length does not match forward model");
    if (model.image_len() != grid.num_points()) throw ConfigError("forward model and grid disagree");
    NllsProblem prob;
    const BasisGrid basis = start.basis;
    const PalsConstants k = start.constants;
    prob.p0 = start.pack();
    prob.residual = [&model, &data, &bounds, grid, basis, k](const Vec& p) -> Vec {
        const PalsParams pp = PalsParams::unpack(p, basis, k);
        return model.apply(eval_f(pp, bounds, grid).values()) - data;
    };
    prob.jacobian = [&model, &bounds, grid, basis, k](const Vec& p) -> Mat {
        const PalsParams pp = PalsParams::unpack(p, basis, k);
        const LevelSetEval ev = evaluate(pp, bounds, grid, true);
        if (dynamic_cast<const IdentityModel*>(&model)) return ev.jac_f;
        return model.jacobian_times(ev.f.values(), ev.jac_f);
    };
    return prob;
}

/// One inner solve with the bounds held fixed.
inline SolveReport solve_with_bounds(const ForwardModel& model, const Vec& data, const PalsParams& start,
                                     const ContrastBounds& bounds, const GridSpec& grid,
                                     const SolveOptions& opt) {
    return solve(make_problem(model, data, start, bounds, grid), opt);
}

/// Alternates inner solves with windowed bound updates until the residual settles,
/// reaches varphi, or k_max bound updates have run.
inline ReconstructResult run_palentir(const ForwardModel& model, const Vec& data, const PalsParams& initial,
                                      const GridSpec& grid, const OuterLoopOptions& opt,
                                      const std::optional<Checkpoint>& resume = std::nullopt) {
    opt.validate();
    ReconstructResult res;
    res.bounds = ContrastBounds::uniform(grid, opt.c_min, opt.c_max);
    PalsParams current = initial;
    int k = -1;
    if (resume) {
        if (!(resume->bounds.grid() == grid)) throw ConfigError("checkpoint bounds live on a different grid");
        current = PalsParams::unpack(resume->p, initial.basis, initial.constants);
        res.bounds = resume->bounds;
        k = resume->outer_index;
    }
    const double varphi = opt.varphi ? *opt.varphi : opt.solve.noise_norm_sq.value_or(0.0);

    auto inner = [&](int outer) -> Vec {
        const PalsParams start = (opt.warm_start || outer < 0) ? current : initial;
        SolveReport rep;
        try {
            rep = solve_with_bounds(model, data, start, res.bounds, grid, opt.solve);
        } catch (const Error& e) {
            throw NumericError("outer iteration " + std::to_string(outer) + ": " + e.what());
        }
        current = PalsParams::unpack(rep.p, initial.basis, initial.constants);
        if (opt.on_outer) opt.on_outer(outer, rep);
        res.reports.push_back(std::move(rep));
        const Vec fr = model.apply(eval_f(current, res.bounds, grid).values()) - data;
        res.outer_residual_sq.push_back(fr.squaredNorm());
        if (!opt.checkpoint_dir.empty()) write_checkpoint({outer, current.pack(), res.bounds}, opt.checkpoint_dir);
        return fr;
    };

    Vec f_prev;          // F^(k-1)
    Vec f_cur = inner(k); // F^(k)
    bool first = true;    // F^(-2) = +inf
    PalsParams best = current;
    ContrastBounds best_bounds = res.bounds;
    double best_sq = f_cur.squaredNorm();
    res.best_outer = k;
    while (k + 1 < opt.k_max) {
        const double cur_sq = f_cur.squaredNorm();
        double rel = std::numeric_limits<double>::infinity();
        if (!first) {
            const double prev_sq = f_prev.squaredNorm();
            rel = opt.change == ChangeForm::vector ? (f_prev - f_cur).squaredNorm() / prev_sq
                                                   : std::abs(prev_sq - cur_sq) / prev_sq;
        }
        const bool moving = rel >= opt.rho, above = cur_sq > varphi;
        if (opt.literal_while ? !(moving || above) : !(moving && above)) break;
        ++k;
        const ScalarField f_hat = eval_f(current, res.bounds, grid);
        ScalarField high = update_c(f_hat, res.bounds.high, opt.eta, opt.delta, ExtremumMode::max);
        ScalarField low = update_c(f_hat, res.bounds.low, opt.eta, opt.delta, ExtremumMode::min);
        for (Index n = 0; n < low.size(); ++n) low[n] = std::min(low[n], high[n]);
        res.bounds = {std::move(high), std::move(low)};
        ++res.outer_iterations;
        f_prev = std::move(f_cur);
        f_cur = inner(k);
        first = false;
        const double sq = f_cur.squaredNorm();
        if (sq < best_sq) {
            best_sq = sq;
            best = current;
            best_bounds = res.bounds;
            res.best_outer = k;
        } else if (opt.stop_on_increase) {
            break;
        }
    }
    if (opt.stop_on_increase) {
        current = best;
        res.bounds = best_bounds;
    }

    res.params = current;
    res.phi = eval_phi(current, grid);
    res.f = synthesize(res.phi, res.bounds, current.constants);
    return res;
}

} // namespace palentir
