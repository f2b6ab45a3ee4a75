#pragma once

// Central finite differences, shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>

#include "palentir/fields.hpp"

namespace palentir::testing {

inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& fn, const Vec& p, double rel_step = 1e-6) {
    const Vec f0 = fn(p);
    Mat j(f0.size(), p.size());
    for (Index k = 0; k < p.size(); ++k) {
        const double h = rel_step * std::max(1.0, std::abs(p[k]));
        Vec a = p, b = p;
        a[k] += h;
        b[k] -= h;
        j.col(k) = (fn(a) - fn(b)) / (2.0 * h);
    }
    return j;
}

/// max_k ||J_k - F_k|| / max(||F_k||, floor), the column-wise relative error.
inline double max_column_error(const Mat& analytic, const Mat& fd, double floor = 1e-8) {
    double worst = 0.0;
    for (Index k = 0; k < fd.cols(); ++k) {
        const double scale = std::max(fd.col(k).norm(), floor);
        worst = std::max(worst, (analytic.col(k) - fd.col(k)).norm() / scale);
    }
    return worst;
}

} // namespace palentir::testing
