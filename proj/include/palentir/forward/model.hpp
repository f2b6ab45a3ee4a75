#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "palentir/error.hpp"
#include "palentir/fields.hpp"

namespace palentir {

using SparseRowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Forward operator M taking an image vector (length N_pts) to a real data vector.
/// Complex-valued physics stacks [real; imag] so callers only see real data.
class ForwardModel {
public:
    virtual ~ForwardModel() = default;

    virtual std::string name() const = 0;
    virtual Index image_len() const = 0;
    virtual Index data_len() const = 0;
    /// Shape used when serializing the data vector (product equals data_len()).
    virtual std::vector<Index> data_dims() const { return {data_len()}; }

    virtual Vec apply(const Vec& f) const = 0;

    /// dM/df evaluated at f, times jf (N_pts x n_p): the chain-rule product.
    virtual Mat jacobian_times(const Vec& f, const Mat& jf) const = 0;

    virtual bool is_linear() const { return false; }

protected:
    void check_image(const Vec& f) const {
        if (f.size() != image_len())
            throw ConfigError(name() + ": image length " + std::to_string(f.size()) +
                              " does not match operator (" + std::to_string(image_len()) + ")");
    }
};

class IdentityModel final : public ForwardModel {
public:
    explicit IdentityModel(Index n) : n_(n) {}

    std::string name() const override { return "identity"; }
    Index image_len() const override { return n_; }
    Index data_len() const override { return n_; }
    Vec apply(const Vec& f) const override {
        check_image(f);
        return f;
    }
    Mat jacobian_times(const Vec& f, const Mat& jf) const override {
        check_image(f);
        return jf;
    }
    bool is_linear() const override { return true; }

private:
    Index n_;
};

/// Linear operator stored as an explicit sparse system matrix.
class LinearModel : public ForwardModel {
public:
    Index image_len() const override { return matrix_.cols(); }
    Index data_len() const override { return matrix_.rows(); }

    Vec apply(const Vec& f) const override {
        check_image(f);
        return matrix_ * f;
    }

    Mat jacobian_times(const Vec& f, const Mat& jf) const override {
        check_image(f);
        if (jf.rows() != image_len()) throw ConfigError(name() + ": Jacobian row count mismatch");
        return matrix_ * jf;
    }

    Vec adjoint(const Vec& y) const {
        if (y.size() != data_len()) throw ConfigError(name() + ": data length mismatch");
        return matrix_.transpose() * y;
    }

    bool is_linear() const override { return true; }

    const SparseRowMat& matrix() const { return matrix_; }

protected:
    SparseRowMat matrix_;
};

} // namespace palentir
