#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "palentir/forward/model.hpp"
#include "palentir/forward/siddon.hpp"

namespace palentir {

enum class AngleMode { sparse, limited };

/// sparse: n equally spaced angles in [0, 360); limited: n equally spaced in [1, 90].
inline std::vector<double> radon2d_angles(AngleMode mode, int n = 15) {
    if (n < 1) throw ConfigError("radon: need at least one angle");
    std::vector<double> out;
    for (int k = 0; k < n; ++k) {
        if (mode == AngleMode::sparse)
            out.push_back(360.0 * k / n);
        else
            out.push_back(n == 1 ? 1.0 : 1.0 + 89.0 * k / (n - 1));
    }
    return out;
}

/// Parallel-beam line integrals. For angle theta the detector axis is
/// n = (cos theta, sin theta) in (axis0, axis1) coordinates, rays run along
/// (-sin theta, cos theta), and detector k sits at offset (k - (n_det-1)/2) * spacing
/// from the grid center. Rows are angle-major, detector-minor.
class Radon2dModel final : public LinearModel {
public:
    Radon2dModel(const GridSpec& grid, std::vector<double> angles_deg, Index n_det = 0,
                 double det_spacing = 0.0)
        : grid_(grid), angles_(std::move(angles_deg)) {
        if (grid_.ndim() != 2) throw ConfigError("radon2d: 2D grids only");
        if (angles_.empty()) throw ConfigError("radon2d: empty angle list");
        const double h = std::max(grid_.spacing(0), grid_.spacing(1));
        n_det_ = n_det > 0 ? n_det
                           : static_cast<Index>(std::ceil(std::numbers::sqrt2 *
                                                          static_cast<double>(std::max(grid_.dim(0), grid_.dim(1)))));
        det_spacing_ = det_spacing > 0.0 ? det_spacing : h;

        const double c0 = 0.5 * (grid_.extent(0).lo + grid_.extent(0).hi);
        const double c1 = 0.5 * (grid_.extent(1).lo + grid_.extent(1).hi);
        std::vector<Eigen::Triplet<double>> trip;
        std::vector<RaySegment> seg;
        for (std::size_t a = 0; a < angles_.size(); ++a) {
            const double th = angles_[a] * std::numbers::pi / 180.0;
            const double ct = std::cos(th), st = std::sin(th);
            for (Index k = 0; k < n_det_; ++k) {
                const double s = (static_cast<double>(k) - 0.5 * static_cast<double>(n_det_ - 1)) * det_spacing_;
                seg.clear();
                trace_ray<2>(grid_, {c0 + s * ct, c1 + s * st}, {-st, ct}, seg);
                const Index row = static_cast<Index>(a) * n_det_ + k;
                for (const auto& sg : seg) trip.emplace_back(row, sg.cell, sg.length);
            }
        }
        matrix_.resize(static_cast<Index>(angles_.size()) * n_det_, grid_.num_points());
        matrix_.setFromTriplets(trip.begin(), trip.end());
    }

    std::string name() const override { return "radon2d"; }
    std::vector<Index> data_dims() const override {
        return {static_cast<Index>(angles_.size()), n_det_};
    }
    const std::vector<double>& angles() const { return angles_; }
    Index detector_count() const { return n_det_; }
    double detector_spacing() const { return det_spacing_; }

private:
    GridSpec grid_;
    std::vector<double> angles_;
    Index n_det_ = 0;
    double det_spacing_ = 0.0;
};

} // namespace palentir
