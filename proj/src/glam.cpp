#include "pclm/glam.hpp"

#include <string>

namespace pclm {

DenseMatrix row_tensor(const DenseMatrix& x1, const DenseMatrix& x2) {
    if (x1.rows() != x2.rows())
        throw DimensionError("row_tensor: row counts differ (" + std::to_string(x1.rows()) + " vs " +
                             std::to_string(x2.rows()) + ")");
    const std::size_t n = x1.rows();
    const std::size_t c1 = x1.cols();
    const std::size_t c2 = x2.cols();
    DenseMatrix out(n, c1 * c2);
    auto o = out.map();
    auto m1 = x1.map();
    auto m2 = x2.map();
    for (std::size_t p = 0; p < c1; ++p)
        for (std::size_t q = 0; q < c2; ++q)
            o.col(static_cast<Eigen::Index>(p * c2 + q)) =
                m1.col(static_cast<Eigen::Index>(p)).cwiseProduct(m2.col(static_cast<Eigen::Index>(q)));
    return out;
}

NdArray h_transform(const DenseMatrix& x, const NdArray& a) {
    if (x.cols() != a.dim(0))
        throw DimensionError("h_transform: matrix has " + std::to_string(x.cols()) +
                             " columns but the array's first extent is " + std::to_string(a.dim(0)));
    const std::size_t rest = a.size() / a.dim(0);
    std::vector<std::size_t> out_dims = a.dims();
    out_dims[0] = x.rows();
    NdArray out(std::move(out_dims));
    out.as_matrix(x.rows(), rest).noalias() = x.map() * a.as_matrix(a.dim(0), rest);
    return out;
}

NdArray rotate(const NdArray& a) {
    const std::size_t d = a.ndim();
    if (d == 1) return a;
    const std::size_t first = a.dim(0);
    const std::size_t rest = a.size() / first;
    std::vector<std::size_t> out_dims(a.dims().begin() + 1, a.dims().end());
    out_dims.push_back(first);
    NdArray out(std::move(out_dims));
    // Viewed as matrices (first extent x rest), rotation is a plain transpose.
    out.as_matrix(rest, first).noalias() = a.as_matrix(first, rest).transpose();
    return out;
}

NdArray rh(const DenseMatrix& x, const NdArray& a) {
    if (x.cols() != a.dim(0))
        throw DimensionError("rh: matrix has " + std::to_string(x.cols()) +
                             " columns but the array's first extent is " + std::to_string(a.dim(0)));
    const std::size_t rest = a.size() / a.dim(0);
    std::vector<std::size_t> out_dims(a.dims().begin() + 1, a.dims().end());
    out_dims.push_back(x.rows());
    NdArray out(std::move(out_dims));
    // Fused H-transform + rotation: out = (X A*)' = A*' X'.
    out.as_matrix(rest, x.rows()).noalias() = a.as_matrix(a.dim(0), rest).transpose() * x.map().transpose();
    return out;
}

NdArray apply_tensor(const std::vector<DenseMatrix>& mats, const NdArray& a) {
    const std::size_t d = a.ndim();
    if (mats.size() != d)
        throw DimensionError("apply_tensor: " + std::to_string(mats.size()) + " matrices for a " +
                             std::to_string(d) + "-dimensional array");
    for (std::size_t k = 0; k < d; ++k)
        if (mats[k].cols() != a.dim(k))
            throw DimensionError("apply_tensor: dimension " + std::to_string(k + 1) + " has extent " +
                                 std::to_string(a.dim(k)) + " but matrix " + std::to_string(k + 1) + " has " +
                                 std::to_string(mats[k].cols()) + " columns");
    NdArray cur = rh(mats[0], a);
    for (std::size_t k = 1; k < d; ++k) cur = rh(mats[k], cur);
    return cur;
}

DenseMatrix weighted_inner_product(const std::vector<DenseMatrix>& mats, const NdArray& w) {
    const std::size_t d = w.ndim();
    if (mats.size() != d)
        throw DimensionError("weighted_inner_product: " + std::to_string(mats.size()) + " matrices for a " +
                             std::to_string(d) + "-dimensional weight array");
    std::vector<DenseMatrix> gts;
    std::vector<std::size_t> c(d);
    gts.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        if (mats[k].rows() != w.dim(k))
            throw DimensionError("weighted_inner_product: dimension " + std::to_string(k + 1) +
                                 " has extent " + std::to_string(w.dim(k)) + " but matrix " +
                                 std::to_string(k + 1) + " has " + std::to_string(mats[k].rows()) + " rows");
        gts.push_back(row_tensor(mats[k], mats[k]).transposed());
        c[k] = mats[k].cols();
    }
    return rearrange_inner(apply_tensor(gts, w), c);
}

DenseMatrix rearrange_pairs(const NdArray& rstar, const std::vector<std::size_t>& row_extents,
                            const std::vector<std::size_t>& col_extents) {
    const std::size_t d = rstar.ndim();
    if (row_extents.size() != d || col_extents.size() != d)
        throw DimensionError("rearrange_pairs: extent lists must have one entry per array dimension");
    for (std::size_t k = 0; k < d; ++k)
        if (rstar.dim(k) != row_extents[k] * col_extents[k])
            throw DimensionError("rearrange_pairs: dimension " + std::to_string(k + 1) + " has extent " +
                                 std::to_string(rstar.dim(k)) + ", expected " +
                                 std::to_string(row_extents[k] * col_extents[k]));

    const std::size_t n_rows = product(row_extents);
    const std::size_t n_cols = product(col_extents);
    DenseMatrix out(n_rows, n_cols);

    // Per-dimension lookup: fused index a_k -> contributions to the output
    // row/column offsets under first-index-fastest strides.
    std::vector<std::vector<std::size_t>> row_part(d), col_part(d);
    {
        std::size_t row_stride = 1, col_stride = 1;
        for (std::size_t k = 0; k < d; ++k) {
            const std::size_t ck = row_extents[k], nk = col_extents[k];
            row_part[k].resize(ck * nk);
            col_part[k].resize(ck * nk);
            for (std::size_t a = 0; a < ck * nk; ++a) {
                row_part[k][a] = (a / nk) * row_stride;
                col_part[k][a] = (a % nk) * col_stride;
            }
            row_stride *= ck;
            col_stride *= nk;
        }
    }

    std::vector<std::size_t> idx(d, 0);
    std::size_t row = 0, col = 0;
    const double* src = rstar.data();
    double* dst = out.data();
    const std::size_t total = rstar.size();
    for (std::size_t flat = 0; flat < total; ++flat) {
        dst[row + n_rows * col] = src[flat];
        for (std::size_t k = 0; k < d; ++k) {
            row -= row_part[k][idx[k]];
            col -= col_part[k][idx[k]];
            if (++idx[k] < rstar.dim(k)) {
                row += row_part[k][idx[k]];
                col += col_part[k][idx[k]];
                break;
            }
            idx[k] = 0;
        }
    }
    return out;
}

DenseMatrix rearrange_inner(const NdArray& rstar, const std::vector<std::size_t>& c) {
    const std::size_t d = rstar.ndim();
    if (c.size() != d) throw DimensionError("rearrange_inner: one basis size per array dimension required");
    for (std::size_t k = 0; k < d; ++k)
        if (rstar.dim(k) != c[k] * c[k])
            throw DimensionError("rearrange_inner: dimension " + std::to_string(k + 1) + " has extent " +
                                 std::to_string(rstar.dim(k)) + ", not the square of " + std::to_string(c[k]));
    return rearrange_pairs(rstar, c, c);
}

NdArray rearrange_v(const DenseMatrix& v, const std::vector<std::size_t>& c) {
    const std::size_t total = product(c);
    if (v.rows() != total || v.cols() != total)
        throw DimensionError("rearrange_v: matrix is " + std::to_string(v.rows()) + "x" +
                             std::to_string(v.cols()) + " but prod(c) = " + std::to_string(total));
    const std::size_t d = c.size();
    std::vector<std::size_t> out_dims(d);
    for (std::size_t k = 0; k < d; ++k) out_dims[k] = c[k] * c[k];
    NdArray out(std::move(out_dims));

    std::vector<std::vector<std::size_t>> row_part(d), col_part(d);
    {
        std::size_t stride = 1;
        for (std::size_t k = 0; k < d; ++k) {
            const std::size_t ck = c[k];
            row_part[k].resize(ck * ck);
            col_part[k].resize(ck * ck);
            for (std::size_t a = 0; a < ck * ck; ++a) {
                row_part[k][a] = (a / ck) * stride;
                col_part[k][a] = (a % ck) * stride;
            }
            stride *= ck;
        }
    }

    std::vector<std::size_t> idx(d, 0);
    std::size_t row = 0, col = 0;
    const double* src = v.data();
    double* dst = out.data();
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        dst[flat] = src[row + total * col];
        for (std::size_t k = 0; k < d; ++k) {
            row -= row_part[k][idx[k]];
            col -= col_part[k][idx[k]];
            if (++idx[k] < out.dim(k)) {
                row += row_part[k][idx[k]];
                col += col_part[k][idx[k]];
                break;
            }
            idx[k] = 0;
        }
    }
    return out;
}

} // namespace pclm
