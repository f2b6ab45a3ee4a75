#pragma once

// Seeded noise models targeted at a data SNR of 20 log10(||x|| / ||w||).

#include <cmath>
#include <limits>
#include <string>

#include "palentir/error.hpp"
#include "palentir/fields.hpp"
#include "palentir/rng.hpp"

namespace palentir {

enum class NoiseKind { none, gaussian, salt_pepper, poisson, speckle };

inline NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "none") return NoiseKind::none;
    if (s == "gaussian") return NoiseKind::gaussian;
    if (s == "salt_pepper") return NoiseKind::salt_pepper;
    if (s == "poisson") return NoiseKind::poisson;
    if (s == "speckle") return NoiseKind::speckle;
    throw ConfigError("unknown noise kind '" + s + "'");
}

inline std::string to_string(NoiseKind k) {
    switch (k) {
    case NoiseKind::none: return "none";
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::salt_pepper: return "salt_pepper";
    case NoiseKind::poisson: return "poisson";
    case NoiseKind::speckle: return "speckle";
    }
    return "?";
}

struct NoiseSpec {
    NoiseKind kind = NoiseKind::gaussian;
    double snr_db = 40.0;
    std::uint64_t seed = 1;
};

struct NoisyData {
    Vec noisy;
    double realized_snr_db = std::numeric_limits<double>::infinity();
    double noise_norm = 0.0;
};

inline double snr_db(const Vec& clean, const Vec& noise) {
    const double wn = noise.norm();
    if (wn == 0.0) return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(clean.norm() / wn);
}

namespace detail {

inline NoisyData finish(const Vec& clean, Vec noisy) {
    NoisyData out;
    const Vec w = noisy - clean;
    out.noise_norm = w.norm();
    out.realized_snr_db = snr_db(clean, w);
    out.noisy = std::move(noisy);
    return out;
}

inline Vec salt_pepper_draw(const Vec& clean, double fraction, std::uint64_t seed) {
    Rng rng(seed);
    const double lo = clean.minCoeff(), hi = clean.maxCoeff();
    Vec out = clean;
    for (Index i = 0; i < clean.size(); ++i) {
        const double u = rng.uniform01();
        const double side = rng.uniform01();
        if (u < fraction) out[i] = side < 0.5 ? lo : hi;
    }
    return out;
}

inline Vec poisson_draw(const Vec& clean, double scale, std::uint64_t seed) {
    Rng rng(seed);
    Vec out(clean.size());
    for (Index i = 0; i < clean.size(); ++i)
        out[i] = static_cast<double>(rng.poisson(std::max(0.0, clean[i]) * scale)) / scale;
    return out;
}

// Bisection on a monotone knob; keeps the draw whose SNR lands closest to the target.
template <class Draw>
NoisyData bisect(const Vec& clean, double target, double lo, double hi, bool log_scale, bool snr_rises, Draw draw) {
    NoisyData best;
    double best_err = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 80; ++it) {
        const double mid = log_scale ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
        NoisyData nd = finish(clean, draw(mid));
        const double err = std::abs(nd.realized_snr_db - target);
        if (err < best_err) {
            best_err = err;
            best = nd;
        }
        if (err < 1e-3) break;
        const bool too_clean = nd.realized_snr_db > target;
        if (too_clean == snr_rises) hi = mid;
        else lo = mid;
    }
    return best;
}

} // namespace detail

inline NoisyData add_noise(const Vec& clean, const NoiseSpec& spec) {
    if (spec.kind == NoiseKind::none) return detail::finish(clean, clean);
    if (!(clean.norm() > 0.0)) throw ConfigError("noise: cannot target an SNR on zero data");
    const double target_ratio = std::pow(10.0, -spec.snr_db / 20.0); // ||w|| / ||x||
    Rng rng(spec.seed);
    switch (spec.kind) {
    case NoiseKind::gaussian: {
        Vec w(clean.size());
        for (Index i = 0; i < w.size(); ++i) w[i] = rng.normal();
        w *= target_ratio * clean.norm() / w.norm();
        return detail::finish(clean, clean + w);
    }
    case NoiseKind::speckle: {
        Vec u(clean.size());
        for (Index i = 0; i < u.size(); ++i) u[i] = rng.uniform(-1.0, 1.0);
        Vec w = clean.cwiseProduct(u);
        if (!(w.norm() > 0.0)) throw ConfigError("noise: speckle needs nonzero data");
        w *= target_ratio * clean.norm() / w.norm();
        return detail::finish(clean, clean + w);
    }
    case NoiseKind::salt_pepper: {
        if (clean.maxCoeff() == clean.minCoeff()) throw ConfigError("noise: salt and pepper needs a data range");
        return detail::bisect(clean, spec.snr_db, 0.0, 1.0, false, false,
                              [&](double q) { return detail::salt_pepper_draw(clean, q, spec.seed); });
    }
    case NoiseKind::poisson: {
        if (clean.minCoeff() < 0.0) throw ConfigError("noise: poisson needs nonnegative data");
        return detail::bisect(clean, spec.snr_db, 1e-6, 1e12, true, true,
                              [&](double s) { return detail::poisson_draw(clean, s, spec.seed); });
    }
    case NoiseKind::none: break;
    }
    return detail::finish(clean, clean);
}

} // namespace palentir
