#pragma once

#include <vector>

#include "pclm/nd_array.hpp"

namespace pclm {

/// Array kernels for Kronecker-structured computations.
///
/// Every routine here operates on the small marginal matrices and the data
/// array directly; the Kronecker-product operator they jointly represent is
/// never materialized. With first-index-fastest storage the flat result of
/// apply_tensor equals (X_d (x) ... (x) X_1) vec(A).

/// Row tensor: row i of the result is kron(row i of X1, row i of X2), that is
/// (X1 (x) 1'_{c2}) .* (1'_{c1} (x) X2). Columns of X1 index the result's
/// columns slowly, columns of X2 quickly.
DenseMatrix row_tensor(const DenseMatrix& x1, const DenseMatrix& x2);

/// H-transform: premultiplies the first dimension of A by X. Dims 2..d of A
/// are flattened to a (c1 x prod-of-rest) matrix, multiplied, and reinstated,
/// giving an array of extents (r, c2, ..., cd).
NdArray h_transform(const DenseMatrix& x, const NdArray& a);

/// Cyclic rotation: extents cycle left by one, so element (i2,...,id,i1) of
/// the result equals element (i1,...,id) of A. For d = 2 this is transpose;
/// applying it d times is the identity.
NdArray rotate(const NdArray& a);

/// Rotated H-transform rho(X, A) = rotate(h_transform(X, A)). Nesting d of
/// these applies a full tensor-product operator one cheap factor at a time.
NdArray rh(const DenseMatrix& x, const NdArray& a);

/// Applies the tensor-product operator X_d (x) ... (x) X_1 to vec(A) as d
/// nested rotated H-transforms: vec(result) = (X_d (x) ... (x) X_1) vec(A).
/// mats[k] must have A.dim(k) columns.
NdArray apply_tensor(const std::vector<DenseMatrix>& mats, const NdArray& a);

/// Weighted inner product (B_d (x) ... (x) B_1)' diag(vec W) (B_d (x) ... (x) B_1),
/// computed as nested rotated H-transforms of W by the transposed row tensors
/// G(B_k, B_k)' and rearranged from extents (c1^2, ..., cd^2) into the C x C
/// normal-equations block, C = prod c_k. mats[k] must have W.dim(k) rows.
DenseMatrix weighted_inner_product(const std::vector<DenseMatrix>& mats, const NdArray& w);

/// Rearranges an array of extents (c1*n1, ..., cd*nd) — per-dimension index
/// a_k = p_k * n_k + q_k with p_k slow — into the (prod c_k) x (prod n_k)
/// matrix whose row is the first-index-fastest linearization of (p_1..p_d)
/// and whose column is that of (q_1..q_d). This is the "same elements,
/// different order" step shared by the inner product and the B'GammaC' block.
DenseMatrix rearrange_pairs(const NdArray& rstar, const std::vector<std::size_t>& row_extents,
                            const std::vector<std::size_t>& col_extents);

/// Square case of rearrange_pairs: (c1^2, ..., cd^2) array to C x C matrix.
DenseMatrix rearrange_inner(const NdArray& rstar, const std::vector<std::size_t>& c);

/// Exact inverse of rearrange_inner's placement: C x C matrix back to the
/// (c1^2, ..., cd^2) array consumed by the diag(BVB') kernel.
NdArray rearrange_v(const DenseMatrix& v, const std::vector<std::size_t>& c);

} // namespace pclm
