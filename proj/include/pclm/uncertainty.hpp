#pragma once

#include <vector>

#include "pclm/problem.hpp"
#include "pclm/solver.hpp"

namespace pclm {

struct VarianceResult {
    DenseMatrix v;       // C x C posterior covariance of alpha
    NdArray se_eta;      // per-cell standard error of eta-hat
    NdArray ci_lower;    // rate-scale bounds exp(eta -+ z se)
    NdArray ci_upper;
    double level = 0.95;
    // Effective dimension trace((H0+P)^-1 H0), obtained from V through the
    // identity ED = C - trace(V P).
    double ed = 0.0;
};

/// B'GammaC' as a C x N matrix, computed from the marginal factors through
/// the row-tensor / rotated-H-transform route and the pair rearrangement;
/// neither B nor C is ever formed. This is the one deliberately large
/// intermediate of the variance step.
DenseMatrix compute_bgc(const std::vector<DenseMatrix>& bases, const std::vector<CompositionMatrix>& comps,
                        const NdArray& gamma);

/// H0 = bgc diag(w) bgc' with w_g = 1/mu_g, applied by scaling columns of a
/// copy of bgc. Groups whose fitted mean sits below mu_floor get weight zero
/// so fully unexposed groups cannot blow up the information matrix.
DenseMatrix information_matrix(const DenseMatrix& bgc, const NdArray& mu, double mu_floor = 1e-8);

/// V = (H0 + P)^-1 via a Cholesky factorization.
DenseMatrix compute_v(const DenseMatrix& bgc, const NdArray& mu, const DenseMatrix& penalty,
                      double mu_floor = 1e-8);

/// Per-cell variance of eta-hat: diag(B V B') rearranged through the array
/// kernels; B is never formed. Tiny negatives are clamped to zero, anything
/// below -1e-10 raises a NumericalError.
NdArray diag_bvb(const DenseMatrix& v, const std::vector<DenseMatrix>& bases);

/// Rate-scale interval exp(eta +- z se) at the given two-sided level.
void confidence_intervals(const NdArray& eta_hat, const NdArray& se_eta, double level, NdArray& lower,
                          NdArray& upper);

/// Full post-convergence uncertainty pass: bgc, V, standard errors and
/// intervals, computed once per fit.
VarianceResult compute_variance(const PclmProblem& problem, const FitResult& fit_result, double level = 0.95);

/// Standard normal quantile (lower tail), accurate to ~1e-15.
double normal_quantile(double p);

} // namespace pclm
