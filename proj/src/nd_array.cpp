#include "pclm/nd_array.hpp"

#include <cmath>
#include <sstream>

namespace pclm {

namespace alloc_stats {

namespace {
std::atomic<std::size_t> g_peak{0};
}

void reset() { g_peak.store(0, std::memory_order_relaxed); }

std::size_t peak_elements() { return g_peak.load(std::memory_order_relaxed); }

void note(std::size_t n) {
    std::size_t cur = g_peak.load(std::memory_order_relaxed);
    while (n > cur && !g_peak.compare_exchange_weak(cur, n, std::memory_order_relaxed)) {
    }
}

} // namespace alloc_stats

std::size_t product(std::span<const std::size_t> v) {
    std::size_t p = 1;
    for (std::size_t x : v) p *= x;
    return p;
}

std::string dims_to_string(std::span<const std::size_t> dims) {
    std::ostringstream os;
    os << "(";
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (k) os << "x";
        os << dims[k];
    }
    os << ")";
    return os.str();
}

NdArray::NdArray(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw DimensionError("NdArray requires at least one dimension");
    for (std::size_t m : dims_)
        if (m == 0) throw DimensionError("NdArray extents must be positive");
    data_.assign(product(dims_), 0.0);
    alloc_stats::note(data_.size());
}

NdArray::NdArray(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
    if (dims_.empty()) throw DimensionError("NdArray requires at least one dimension");
    for (std::size_t m : dims_)
        if (m == 0) throw DimensionError("NdArray extents must be positive");
    if (data_.size() != product(dims_))
        throw DimensionError("NdArray data length " + std::to_string(data_.size()) +
                             " does not match extents " + dims_to_string(dims_));
    alloc_stats::note(data_.size());
}

NdArray NdArray::constant(std::vector<std::size_t> dims, double value) {
    NdArray a(std::move(dims));
    std::fill(a.data_.begin(), a.data_.end(), value);
    return a;
}

std::size_t NdArray::offset(std::span<const std::size_t> idx) const {
    if (idx.size() != dims_.size()) throw DimensionError("index rank mismatch");
    std::size_t off = 0;
    std::size_t stride = 1;
    for (std::size_t k = 0; k < dims_.size(); ++k) {
        if (idx[k] >= dims_[k]) throw DimensionError("index out of range in dimension " + std::to_string(k + 1));
        off += stride * idx[k];
        stride *= dims_[k];
    }
    return off;
}

double NdArray::sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
}

double NdArray::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

Eigen::Map<const Eigen::MatrixXd> NdArray::as_matrix(std::size_t rows, std::size_t cols) const {
    if (rows * cols != data_.size()) throw DimensionError("as_matrix: shape does not cover the buffer");
    return {data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

Eigen::Map<Eigen::MatrixXd> NdArray::as_matrix(std::size_t rows, std::size_t cols) {
    if (rows * cols != data_.size()) throw DimensionError("as_matrix: shape does not cover the buffer");
    return {data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

Eigen::Map<const Eigen::VectorXd> NdArray::as_vector() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
}

Eigen::Map<Eigen::VectorXd> NdArray::as_vector() {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    if (rows == 0 || cols == 0) throw DimensionError("DenseMatrix extents must be positive");
    alloc_stats::note(data_.size());
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0) throw DimensionError("DenseMatrix extents must be positive");
    if (data_.size() != rows * cols)
        throw DimensionError("DenseMatrix data length does not match " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    alloc_stats::note(data_.size());
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::from_ndarray(const NdArray& a) {
    if (a.ndim() == 1) return DenseMatrix(a.dim(0), 1, a.values());
    if (a.ndim() != 2)
        throw DimensionError("from_ndarray: expected a 2-dimensional array, got " + dims_to_string(a.dims()));
    return DenseMatrix(a.dim(0), a.dim(1), a.values());
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    t.map().noalias() = map().transpose();
    return t;
}

NdArray DenseMatrix::to_ndarray() const { return NdArray({rows_, cols_}, data_); }

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t j = 0; j < a.cols(); ++j)
        for (std::size_t i = 0; i < a.rows(); ++i) {
            const double aij = a(i, j);
            if (aij == 0.0) continue;
            for (std::size_t l = 0; l < b.cols(); ++l)
                for (std::size_t k = 0; k < b.rows(); ++k)
                    out(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
        }
    return out;
}

} // namespace pclm
