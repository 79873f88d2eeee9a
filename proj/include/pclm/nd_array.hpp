#pragma once

#include <atomic>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pclm/errors.hpp"

namespace pclm {

/// Tracks the largest single buffer (in elements) allocated through NdArray /
/// DenseMatrix since the last reset. Used by the benchmark to compare the peak
/// working-set of the array path against the explicit-matrix path.
namespace alloc_stats {

void reset();
std::size_t peak_elements();
void note(std::size_t n);

} // namespace alloc_stats

/// Dense d-dimensional array of doubles, d >= 1.
///
/// Storage is flat with the FIRST index fastest: element (i1,...,id) lives at
/// offset i1 + m1*i2 + m1*m2*i3 + ... (0-based). For d = 2 this is plain
/// column-major storage, so flattening a matrix equals stacking its columns,
/// and tensor-product operators acting on the flat vector factor as
/// X_d (x) ... (x) X_1.
class NdArray {
public:
    NdArray() = default;

    /// Zero-filled array with the given extents.
    explicit NdArray(std::vector<std::size_t> dims);

    /// Wraps an existing flat buffer; data.size() must equal the product of dims.
    NdArray(std::vector<std::size_t> dims, std::vector<double> data);

    static NdArray constant(std::vector<std::size_t> dims, double value);

    std::size_t ndim() const { return dims_.size(); }
    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t dim(std::size_t k) const { return dims_[k]; }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    /// Flat offset of a multi-index (first index fastest).
    std::size_t offset(std::span<const std::size_t> idx) const;
    double at(std::span<const std::size_t> idx) const { return data_[offset(idx)]; }
    double& at(std::span<const std::size_t> idx) { return data_[offset(idx)]; }
    double at(std::initializer_list<std::size_t> idx) const {
        return at(std::span<const std::size_t>(idx.begin(), idx.size()));
    }
    double& at(std::initializer_list<std::size_t> idx) {
        return at(std::span<const std::size_t>(idx.begin(), idx.size()));
    }

    double sum() const;
    double max_abs() const;

    /// The flat buffer viewed as an r x c column-major matrix (r*c == size()).
    Eigen::Map<const Eigen::MatrixXd> as_matrix(std::size_t rows, std::size_t cols) const;
    Eigen::Map<Eigen::MatrixXd> as_matrix(std::size_t rows, std::size_t cols);
    Eigen::Map<const Eigen::VectorXd> as_vector() const;
    Eigen::Map<Eigen::VectorXd> as_vector();

private:
    std::vector<std::size_t> dims_;
    std::vector<double> data_;
};

/// Dense matrix with column-major flat storage; an NdArray with d = 2 as far
/// as layout is concerned, kept as a separate type so kernel signatures can
/// insist on two-dimensional arguments.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix from_ndarray(const NdArray& a);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double operator()(std::size_t i, std::size_t j) const { return data_[i + rows_ * j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i + rows_ * j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    DenseMatrix transposed() const;
    NdArray to_ndarray() const;

    Eigen::Map<const Eigen::MatrixXd> map() const {
        return {data_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)};
    }
    Eigen::Map<Eigen::MatrixXd> map() {
        return {data_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)};
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Kronecker product A (x) B, formed explicitly. Small operands only; the
/// array kernels exist precisely so this is never needed on full model
/// matrices.
DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b);

std::size_t product(std::span<const std::size_t> v);
std::string dims_to_string(std::span<const std::size_t> dims);

} // namespace pclm
