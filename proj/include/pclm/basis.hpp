#pragma once

#include <span>
#include <vector>

#include "pclm/nd_array.hpp"

namespace pclm {

/// Marginal B-spline basis settings: equally spaced knots over [xmin, xmax]
/// with `degree` extra knots beyond each boundary. The basis has
/// n_intervals + degree columns.
struct BasisSpec {
    double xmin = 0.0;
    double xmax = 1.0;
    std::size_t n_intervals = 10;
    int degree = 3;

    std::size_t n_basis() const { return n_intervals + static_cast<std::size_t>(degree); }
};

/// Per-dimension difference penalty: P = sum_k lambda_k * (kron placement of
/// D_k' D_k), with D_k the order-th difference matrix for dimension k.
struct PenaltySpec {
    std::vector<double> lambdas;
    int order = 2;
};

/// Evaluates the basis at the fine-grid coordinates x (all within
/// [xmin, xmax]). Rows sum to one and hold at most degree + 1 nonzeros.
DenseMatrix build_bspline_basis(const BasisSpec& spec, std::span<const double> x);

/// k-th order difference matrix of size (c - k) x c; D v computes k-th
/// differences of v.
DenseMatrix build_difference_matrix(std::size_t c, int order);

/// Explicit C x C penalty, C = prod c_k: for each dimension the matrix
/// D_k' D_k sits in its Kronecker slot with identities elsewhere, scaled by
/// lambda_k. C stays small in this model class, so no array treatment is
/// needed here.
DenseMatrix build_penalty(const std::vector<std::size_t>& c, const PenaltySpec& spec);

} // namespace pclm
