#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "msda/error.hpp"

namespace msda {

/// One sparse column: (feature index, value) pairs sorted by index.
using SparseColumn = std::vector<std::pair<std::uint32_t, double>>;

/// Collection of n input vectors in R^d, stored column-wise.
///
/// Storage is either sparse (per-column index/value lists, the natural
/// form for bag-of-words counts) or dense (Eigen matrix, the form hidden
/// representations take after a squashed layer). The constant bias
/// feature is never stored; operations that need it treat it as an
/// implicit (d+1)-th coordinate equal to 1.
class DataMatrix {
public:
    enum class Kind { Raw, Hidden };

    DataMatrix() = default;

    static DataMatrix make_sparse(std::size_t dim, std::vector<SparseColumn> cols,
                                  Kind kind = Kind::Raw) {
        for (const auto& col : cols) {
            for (const auto& [idx, val] : col) {
                if (idx >= dim)
                    throw ShapeError("feature index " + std::to_string(idx) +
                                     " out of range for dimension " + std::to_string(dim));
                if (!std::isfinite(val))
                    throw NumericError("non-finite value in sparse column");
            }
        }
        DataMatrix m;
        m.dim_ = dim;
        m.sparse_ = std::move(cols);
        m.kind_ = kind;
        return m;
    }

    static DataMatrix make_dense(Eigen::MatrixXd values, Kind kind = Kind::Hidden) {
        if (!values.allFinite())
            throw NumericError("non-finite value in dense matrix");
        DataMatrix m;
        m.dim_ = static_cast<std::size_t>(values.rows());
        m.dense_ = std::move(values);
        m.is_dense_ = true;
        m.kind_ = kind;
        return m;
    }

    std::size_t dim() const { return dim_; }
    std::size_t cols() const {
        return is_dense_ ? static_cast<std::size_t>(dense_.cols()) : sparse_.size();
    }
    Kind kind() const { return kind_; }
    bool is_dense() const { return is_dense_; }

    const Eigen::MatrixXd& dense_data() const {
        if (!is_dense_) throw ShapeError("matrix is stored sparse");
        return dense_;
    }

    Eigen::MatrixXd to_dense() const {
        if (is_dense_) return dense_;
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim_),
                                                    static_cast<Eigen::Index>(sparse_.size()));
        for (std::size_t j = 0; j < sparse_.size(); ++j)
            for (const auto& [idx, val] : sparse_[j])
                out(idx, static_cast<Eigen::Index>(j)) = val;
        return out;
    }

    /// Visit the nonzeros of column j as f(row, value). Dense columns
    /// visit every coordinate.
    template <class F>
    void for_each_nz(std::size_t j, F&& f) const {
        if (is_dense_) {
            const auto col = dense_.col(static_cast<Eigen::Index>(j));
            for (Eigen::Index i = 0; i < col.size(); ++i)
                f(static_cast<std::uint32_t>(i), col(i));
        } else {
            for (const auto& [idx, val] : sparse_[j]) f(idx, val);
        }
    }

    /// X * v for v in R^n.
    Eigen::VectorXd times(const Eigen::VectorXd& v) const {
        if (static_cast<std::size_t>(v.size()) != cols())
            throw ShapeError("vector length does not match column count");
        if (is_dense_) return dense_ * v;
        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
        for (std::size_t j = 0; j < sparse_.size(); ++j)
            for (const auto& [idx, val] : sparse_[j]) out(idx) += val * v(static_cast<Eigen::Index>(j));
        return out;
    }

    /// X^T * w for w in R^d.
    Eigen::VectorXd transpose_times(const Eigen::VectorXd& w) const {
        if (static_cast<std::size_t>(w.size()) != dim_)
            throw ShapeError("vector length does not match dimension");
        if (is_dense_) return dense_.transpose() * w;
        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sparse_.size()));
        for (std::size_t j = 0; j < sparse_.size(); ++j) {
            double s = 0.0;
            for (const auto& [idx, val] : sparse_[j]) s += val * w(idx);
            out(static_cast<Eigen::Index>(j)) = s;
        }
        return out;
    }

    /// Sum of each row across all columns, as a d-vector.
    Eigen::VectorXd row_sums() const {
        if (is_dense_) return dense_.rowwise().sum();
        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
        for (const auto& col : sparse_)
            for (const auto& [idx, val] : col) out(idx) += val;
        return out;
    }

    /// New matrix keeping only the given columns, in the given order.
    DataMatrix select_columns(const std::vector<std::size_t>& keep) const {
        if (is_dense_) {
            Eigen::MatrixXd out(dense_.rows(), static_cast<Eigen::Index>(keep.size()));
            for (std::size_t j = 0; j < keep.size(); ++j)
                out.col(static_cast<Eigen::Index>(j)) = dense_.col(static_cast<Eigen::Index>(keep[j]));
            DataMatrix m;
            m.dim_ = dim_;
            m.dense_ = std::move(out);
            m.is_dense_ = true;
            m.kind_ = kind_;
            return m;
        }
        std::vector<SparseColumn> cols;
        cols.reserve(keep.size());
        for (std::size_t j : keep) cols.push_back(sparse_[j]);
        DataMatrix m;
        m.dim_ = dim_;
        m.sparse_ = std::move(cols);
        m.kind_ = kind_;
        return m;
    }

    /// Appends the columns of other (same dimension required).
    void append_columns(const DataMatrix& other) {
        if (other.dim() != dim_) throw ShapeError("appending columns of different dimension");
        if (is_dense_ || other.is_dense_) {
            Eigen::MatrixXd merged(static_cast<Eigen::Index>(dim_),
                                   static_cast<Eigen::Index>(cols() + other.cols()));
            merged << to_dense(), other.to_dense();
            dense_ = std::move(merged);
            sparse_.clear();
            is_dense_ = true;
        } else {
            sparse_.insert(sparse_.end(), other.sparse_.begin(), other.sparse_.end());
        }
    }

private:
    std::size_t dim_ = 0;
    std::vector<SparseColumn> sparse_;
    Eigen::MatrixXd dense_;
    bool is_dense_ = false;
    Kind kind_ = Kind::Raw;
};

} // namespace msda
