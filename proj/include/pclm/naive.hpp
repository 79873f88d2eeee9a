#pragma once

#include <string>
#include <vector>

#include "pclm/problem.hpp"
#include "pclm/solver.hpp"

namespace pclm {

/// Result of the explicit-matrix estimation path. B and C are kept for
/// inspection; they are exactly the Kronecker products of the marginal
/// factors.
struct NaiveFit {
    NdArray alpha_hat;
    NdArray eta_hat;
    NdArray gamma_hat;
    DenseMatrix b; // M x C model matrix
    DenseMatrix c; // N x M composition matrix
    std::size_t iterations = 0;
    bool converged = false;
    double pen_loglik = 0.0;
    std::vector<IterationStat> trace;
    std::string stop_reason;
};

/// Explicit Kronecker product X_d (x) ... (x) X_1. Refuses (ResourceError)
/// when the result would exceed element_budget entries.
DenseMatrix build_full_kronecker(const std::vector<DenseMatrix>& mats,
                                 std::size_t element_budget = std::size_t{1} << 27);

/// The classic composite-link scoring: per iteration the working matrix
/// B-breve = W^-1 C Gamma B is formed explicitly and the grouped-scale GLM
/// system (B-breve' W B-breve + P) alpha = B-breve' W z is solved. Same
/// objective, stopping rule and step halving as fit(); exists as the
/// correctness oracle and benchmark baseline.
NaiveFit fit_naive(const PclmProblem& problem, const SolverConfig& config = {});

/// Covariance (B-breve' W B-breve + P)^-1 at convergence.
DenseMatrix naive_covariance(const NaiveFit& nf, const PclmProblem& problem);

struct EngineReport {
    std::string engine;
    std::string status;        // "ok" or the reason the engine was skipped/failed
    double fit_seconds = 0.0;
    double variance_seconds = 0.0;
    std::size_t peak_elements = 0;
    std::size_t iterations = 0;
    bool converged = false;
    double pen_loglik = 0.0;
};

struct BenchmarkReport {
    std::vector<EngineReport> engines;
    double alpha_discrepancy = -1.0;      // max abs difference, -1 when not comparable
    double covariance_discrepancy = -1.0;
};

/// Runs the requested engines ("glam", "naive") sequentially on the same
/// problem, timing fit and variance separately and recording the peak
/// single-allocation element count of each path. A naive run over the element
/// budget is recorded as skipped, not an error.
BenchmarkReport benchmark(const PclmProblem& problem, const SolverConfig& config,
                          const std::vector<std::string>& engines);

} // namespace pclm
