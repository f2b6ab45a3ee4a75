#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "palentir/forward/model.hpp"
#include "palentir/forward/siddon.hpp"

namespace palentir {

using Direction = std::array<double, 3>;

/// n directions on the quarter sphere {x >= 0, y >= 0}: Fibonacci spiral in z,
/// golden-angle azimuth folded into [0, pi/2).
inline std::vector<Direction> parallel3d_directions(int n) {
    if (n < 1) throw ConfigError("parallel3d: need at least one direction");
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::vector<Direction> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double z = 1.0 - (2.0 * k + 1.0) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double az = std::fmod(k * golden, 0.5 * std::numbers::pi);
        Direction d{r * std::cos(az), r * std::sin(az), z};
        const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        for (double& c : d) c /= norm;
        out.push_back(d);
    }
    return out;
}

/// Orthographic projections of a 3D volume. Each view has an n_det x n_det
/// detector perpendicular to its direction, centered on the volume center.
/// Rows: view-major, then detector u index, then v index.
class Parallel3dModel final : public LinearModel {
public:
    Parallel3dModel(const GridSpec& grid, std::vector<Direction> directions, Index n_det = 0,
                    double det_spacing = 0.0)
        : grid_(grid), dirs_(std::move(directions)) {
        if (grid_.ndim() != 3) throw ConfigError("parallel3d: 3D grids only");
        if (dirs_.empty()) throw ConfigError("parallel3d: empty direction list");
        for (auto& d : dirs_) {
            const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            if (!(norm > 0.0)) throw ConfigError("parallel3d: zero direction");
            for (double& c : d) c /= norm;
        }
        Index maxdim = 0;
        double diag2 = 0.0;
        for (int a = 0; a < 3; ++a) {
            maxdim = std::max(maxdim, grid_.dim(a));
            const double w = grid_.extent(a).width() + grid_.spacing(a);
            diag2 += w * w;
        }
        n_det_ = n_det > 0 ? n_det : maxdim;
        det_spacing_ = det_spacing > 0.0 ? det_spacing : std::sqrt(diag2) / static_cast<double>(n_det_);

        std::array<double, 3> center{};
        for (int a = 0; a < 3; ++a) center[a] = 0.5 * (grid_.extent(a).lo + grid_.extent(a).hi);

        std::vector<Eigen::Triplet<double>> trip;
        std::vector<RaySegment> seg;
        for (std::size_t v = 0; v < dirs_.size(); ++v) {
            const auto [u, w] = detector_axes(dirs_[v]);
            for (Index iu = 0; iu < n_det_; ++iu)
                for (Index iw = 0; iw < n_det_; ++iw) {
                    const double su = offset(iu), sw = offset(iw);
                    std::array<double, 3> o{};
                    for (int a = 0; a < 3; ++a) o[a] = center[a] + su * u[a] + sw * w[a];
                    seg.clear();
                    trace_ray<3>(grid_, o, dirs_[v], seg);
                    const Index row = (static_cast<Index>(v) * n_det_ + iu) * n_det_ + iw;
                    for (const auto& sg : seg) trip.emplace_back(row, sg.cell, sg.length);
                }
        }
        matrix_.resize(static_cast<Index>(dirs_.size()) * n_det_ * n_det_, grid_.num_points());
        matrix_.setFromTriplets(trip.begin(), trip.end());
    }

    std::string name() const override { return "parallel3d"; }
    std::vector<Index> data_dims() const override {
        return {static_cast<Index>(dirs_.size()), n_det_, n_det_};
    }
    const std::vector<Direction>& directions() const { return dirs_; }
    Index detector_count() const { return n_det_; }
    double detector_spacing() const { return det_spacing_; }

    double offset(Index k) const {
        return (static_cast<double>(k) - 0.5 * static_cast<double>(n_det_ - 1)) * det_spacing_;
    }

    /// Orthonormal detector axes (u, w) with u, w, dir right-handed.
    static std::pair<Direction, Direction> detector_axes(const Direction& d) {
        int least = 0;
        for (int a = 1; a < 3; ++a)
            if (std::abs(d[a]) < std::abs(d[least])) least = a;
        Direction e{0.0, 0.0, 0.0};
        e[least] = 1.0;
        auto cross = [](const Direction& x, const Direction& y) {
            return Direction{x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2],
                             x[0] * y[1] - x[1] * y[0]};
        };
        Direction u = cross(d, e);
        const double nu = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
        for (double& c : u) c /= nu;
        return {u, cross(d, u)};
    }

private:
    GridSpec grid_;
    std::vector<Direction> dirs_;
    Index n_det_ = 0;
    double det_spacing_ = 0.0;
};

} // namespace palentir
