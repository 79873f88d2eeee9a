#pragma once

#include <optional>
#include <vector>

#include "pclm/basis.hpp"
#include "pclm/composition.hpp"
#include "pclm/nd_array.hpp"

namespace pclm {

/// A grouped-count estimation problem: observed counts at group resolution,
/// optional exposures at fine resolution, per-dimension composition matrices
/// and B-spline bases, and the penalty settings.
struct PclmProblem {
    NdArray y;                            // n1 x ... x nd grouped counts
    std::optional<NdArray> exposures;     // m1 x ... x md, if modelling rates
    std::vector<CompositionMatrix> comps; // one per dimension, n_k x m_k
    std::vector<DenseMatrix> bases;       // one per dimension, m_k x c_k
    PenaltySpec penalty;

    std::size_t n_dims() const { return comps.size(); }
    std::vector<std::size_t> group_extents() const;
    std::vector<std::size_t> fine_extents() const;
    std::vector<std::size_t> coef_extents() const;
    std::size_t n_coef() const { return product(coef_extents()); }

    /// Throws on inconsistent extents, negative counts/exposures, or a group
    /// whose cells all have zero exposure while its count is positive.
    void validate() const;
};

/// Iteration controls for both estimation paths.
struct SolverConfig {
    double tol_alpha = 1e-6;    // convergence threshold on max |delta alpha|
    double tol_loglik = 1e-8;   // relative penalized-log-likelihood change threshold; 0 disables
    std::size_t max_iter = 200;
    int max_step_halvings = 10;
    double gamma_floor = 1e-10; // lower clamp for gamma in divisions
    std::size_t element_budget = std::size_t{1} << 27; // refusal point for explicit matrices
    // The working-response iteration contracts slowly along directions the
    // grouping cannot see; up to this many expected-information steps after
    // the main loop land the iterate on the fixed point. 0 disables.
    std::size_t max_polish = 20;

    void validate() const;
};

} // namespace pclm
