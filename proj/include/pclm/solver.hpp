#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pclm/problem.hpp"

namespace pclm {

/// One accepted iteration of the penalized IRLS.
struct IterationStat {
    double pen_loglik = 0.0;
    double max_step = 0.0;            // max |delta alpha| of the accepted step
    int halvings = 0;
    double redistribution_rel_err = 0.0; // max rel. error of re-aggregating y-breve
};

struct FitResult {
    NdArray alpha_hat; // c1 x ... x cd
    NdArray eta_hat;   // m1 x ... x md
    NdArray gamma_hat; // m1 x ... x md
    std::size_t iterations = 0;        // working-response iterations
    std::size_t polish_iterations = 0; // trailing expected-information steps
    bool converged = false;
    double pen_loglik = 0.0;
    double effective_dimension = 0.0; // filled by effective_dimension()
    std::vector<IterationStat> trace;
    std::string stop_reason;
};

// Per-iteration building blocks. All take and return fine/group-resolution
// arrays; none of them forms B, C or a diagonal weight matrix.

/// Linear predictor eta = (B_d (x) ... (x) B_1) vec(alpha), as an array.
NdArray compute_eta(const NdArray& alpha, const std::vector<DenseMatrix>& bases);

/// gamma = e .* exp(eta) (or exp(eta) without exposures), clamped below at
/// gamma_floor so later divisions stay finite.
NdArray compute_gamma(const NdArray& eta, const std::optional<NdArray>& exposures, double gamma_floor);

/// Expected group counts mu = aggregate(gamma).
NdArray compute_mu(const NdArray& gamma, const std::vector<CompositionMatrix>& comps);

/// Redistributes the observed counts to fine cells proportionally to the
/// current gamma: y-breve = (C'(y ./ mu)) .* gamma. Re-aggregates to y
/// exactly. Throws NumericalError for a group with positive count whose
/// fitted mass is entirely at the clamp.
NdArray working_latent_response(const NdArray& gamma, const NdArray& mu, const NdArray& y,
                                const std::vector<CompositionMatrix>& comps, double gamma_floor);

/// IRLS working vector on the latent scale: z = eta + (y-breve - gamma) ./ gamma.
NdArray working_vector(const NdArray& eta, const NdArray& y_breve, const NdArray& gamma);

/// Normal equations of one update: lhs = B'GammaB + P (via the array inner
/// product), rhs = B'(gamma .* z) (via the transposed-basis linear map).
struct IrlsSystem {
    DenseMatrix lhs;          // C x C, symmetric
    std::vector<double> rhs;  // length C
};
IrlsSystem build_system(const NdArray& gamma, const NdArray& z, const std::vector<DenseMatrix>& bases,
                        const DenseMatrix& penalty);

/// Penalized Poisson log-likelihood y' ln(mu) - 1'gamma - alpha'P alpha / 2,
/// with zero-count groups contributing nothing to the first term. Returns
/// -infinity when a positive count meets a non-positive or non-finite mean,
/// which signals step-halving.
double penalized_loglik(const NdArray& alpha, const PclmProblem& problem, const DenseMatrix& penalty,
                        double gamma_floor);

/// Penalized IRLS driven by the working latent response. Each iteration runs
/// entirely through the array kernels; the only dense factorization is the
/// C x C solve.
FitResult fit(const PclmProblem& problem, const SolverConfig& config = {});

/// Effective dimension trace((H0 + P)^-1 H0), with H0 = B'GammaC'W^-1 CGammaB
/// at convergence. Reduces to the usual penalized-GLM effective dimension for
/// identity composition.
double effective_dimension(const FitResult& fit_result, const PclmProblem& problem);

} // namespace pclm
