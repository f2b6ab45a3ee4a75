#pragma once

// Exact ray/pixel intersection lengths (Siddon) on the cell partition of a
// vertex-centered grid: grid point i owns the cell [x_i - h/2, x_i + h/2].

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "palentir/fields.hpp"

namespace palentir {

struct RaySegment {
    Index cell;
    double length;
};

/// Appends the (cell, length) pairs of the infinite line origin + t * dir.
/// `dir` must be unit length; the output is ordered by increasing t.
template <int D>
void trace_ray(const GridSpec& grid, const std::array<double, D>& origin,
               const std::array<double, D>& dir, std::vector<RaySegment>& out) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::array<double, D> lower{}, step{};
    std::array<Index, D> ncell{};
    double tmin = -kInf, tmax = kInf;
    for (int a = 0; a < D; ++a) {
        step[a] = grid.spacing(a);
        lower[a] = grid.extent(a).lo - 0.5 * step[a];
        ncell[a] = grid.dim(a);
        const double upper = lower[a] + static_cast<double>(ncell[a]) * step[a];
        if (std::abs(dir[a]) < 1e-15) {
            if (origin[a] < lower[a] || origin[a] >= upper) return;
            continue;
        }
        double t1 = (lower[a] - origin[a]) / dir[a];
        double t2 = (upper - origin[a]) / dir[a];
        if (t1 > t2) std::swap(t1, t2);
        tmin = std::max(tmin, t1);
        tmax = std::min(tmax, t2);
    }
    if (!(tmin < tmax)) return;

    std::vector<double> ts{tmin, tmax};
    for (int a = 0; a < D; ++a) {
        if (std::abs(dir[a]) < 1e-15) continue;
        for (Index k = 0; k <= ncell[a]; ++k) {
            const double t = (lower[a] + static_cast<double>(k) * step[a] - origin[a]) / dir[a];
            if (t > tmin && t < tmax) ts.push_back(t);
        }
    }
    std::sort(ts.begin(), ts.end());

    const double eps = 1e-12 * (tmax - tmin);
    for (std::size_t s = 0; s + 1 < ts.size(); ++s) {
        const double len = ts[s + 1] - ts[s];
        if (len <= eps) continue;
        const double tm = 0.5 * (ts[s] + ts[s + 1]);
        Index lin = 0;
        for (int a = 0; a < D; ++a) {
            const double x = origin[a] + tm * dir[a];
            Index c = static_cast<Index>(std::floor((x - lower[a]) / step[a]));
            c = std::clamp<Index>(c, 0, ncell[a] - 1);
            lin = lin * ncell[a] + c;
        }
        if (!out.empty() && out.back().cell == lin)
            out.back().length += len;
        else
            out.push_back({lin, len});
    }
}

} // namespace palentir
