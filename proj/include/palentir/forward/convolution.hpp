#pragma once

#include <cmath>
#include <vector>

#include <Eigen/SparseCore>

#include "palentir/forward/model.hpp"

namespace palentir {

/// size x size stencil, row-major, centered.
struct Kernel2d {
    Index size = 1;
    std::vector<double> weights{1.0};

    double at(Index di, Index dj) const {
        const Index h = size / 2;
        return weights[static_cast<std::size_t>((di + h) * size + (dj + h))];
    }
};

/// Samples exp(-(i^2+j^2) / (2 variance)) on integer offsets, normalized to sum 1.
inline Kernel2d gaussian_kernel(Index size, double variance_px) {
    if (size < 1 || size % 2 == 0) throw ConfigError("gaussian_kernel: size must be odd and >= 1");
    if (!(variance_px > 0.0)) throw ConfigError("gaussian_kernel: variance must be positive");
    Kernel2d k;
    k.size = size;
    k.weights.assign(static_cast<std::size_t>(size * size), 0.0);
    const Index h = size / 2;
    double sum = 0.0;
    for (Index i = -h; i <= h; ++i)
        for (Index j = -h; j <= h; ++j) {
            const double v = std::exp(-static_cast<double>(i * i + j * j) / (2.0 * variance_px));
            k.weights[static_cast<std::size_t>((i + h) * size + (j + h))] = v;
            sum += v;
        }
    for (double& v : k.weights) v /= sum;
    return k;
}

/// 2D correlation with zero padding outside the image; output has the image's shape.
class ConvolutionModel final : public LinearModel {
public:
    ConvolutionModel(const GridSpec& grid, Kernel2d kernel) : grid_(grid), kernel_(std::move(kernel)) {
        if (grid_.ndim() != 2) throw ConfigError("convolution: 2D grids only");
        if (kernel_.size > grid_.dim(0) || kernel_.size > grid_.dim(1))
            throw ConfigError("convolution: kernel larger than image");
        const Index rows = grid_.dim(0), cols = grid_.dim(1), h = kernel_.size / 2;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(rows * cols * kernel_.size * kernel_.size));
        for (Index r = 0; r < rows; ++r)
            for (Index c = 0; c < cols; ++c)
                for (Index di = -h; di <= h; ++di)
                    for (Index dj = -h; dj <= h; ++dj) {
                        const Index rr = r + di, cc = c + dj;
                        if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                        trip.emplace_back(r * cols + c, rr * cols + cc, kernel_.at(di, dj));
                    }
        matrix_.resize(rows * cols, rows * cols);
        matrix_.setFromTriplets(trip.begin(), trip.end());
    }

    std::string name() const override { return "convolution"; }
    std::vector<Index> data_dims() const override { return grid_.dims(); }
    const Kernel2d& kernel() const { return kernel_; }

    /// Direct loop evaluation, independent of the assembled matrix.
    Vec convolve_direct(const Vec& f) const {
        check_image(f);
        const Index rows = grid_.dim(0), cols = grid_.dim(1), h = kernel_.size / 2;
        Vec out = Vec::Zero(f.size());
        for (Index r = 0; r < rows; ++r)
            for (Index c = 0; c < cols; ++c) {
                double s = 0.0;
                for (Index di = -h; di <= h; ++di)
                    for (Index dj = -h; dj <= h; ++dj) {
                        const Index rr = r + di, cc = c + dj;
                        if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                        s += kernel_.at(di, dj) * f[rr * cols + cc];
                    }
                out[r * cols + c] = s;
            }
        return out;
    }

private:
    GridSpec grid_;
    Kernel2d kernel_;
};

} // namespace palentir
