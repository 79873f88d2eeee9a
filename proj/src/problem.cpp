#include "pclm/problem.hpp"

#include <cmath>
#include <string>

#include "pclm/errors.hpp"

namespace pclm {

std::vector<std::size_t> PclmProblem::group_extents() const {
    std::vector<std::size_t> n(comps.size());
    for (std::size_t k = 0; k < comps.size(); ++k) n[k] = comps[k].n_groups();
    return n;
}

std::vector<std::size_t> PclmProblem::fine_extents() const {
    std::vector<std::size_t> m(comps.size());
    for (std::size_t k = 0; k < comps.size(); ++k) m[k] = comps[k].n_fine();
    return m;
}

std::vector<std::size_t> PclmProblem::coef_extents() const {
    std::vector<std::size_t> c(bases.size());
    for (std::size_t k = 0; k < bases.size(); ++k) c[k] = bases[k].cols();
    return c;
}

void PclmProblem::validate() const {
    const std::size_t d = comps.size();
    if (d == 0) throw ValidationError("PclmProblem: no composition matrices");
    if (bases.size() != d)
        throw DimensionError("PclmProblem: " + std::to_string(bases.size()) + " bases for " +
                             std::to_string(d) + " dimensions");
    if (y.ndim() != d)
        throw DimensionError("PclmProblem: counts are " + std::to_string(y.ndim()) + "-dimensional, expected " +
                             std::to_string(d));
    for (std::size_t k = 0; k < d; ++k) {
        if (y.dim(k) != comps[k].n_groups())
            throw DimensionError("PclmProblem: counts extent " + std::to_string(y.dim(k)) + " in dimension " +
                                 std::to_string(k + 1) + " does not match " +
                                 std::to_string(comps[k].n_groups()) + " groups");
        if (bases[k].rows() != comps[k].n_fine())
            throw DimensionError("PclmProblem: basis in dimension " + std::to_string(k + 1) + " has " +
                                 std::to_string(bases[k].rows()) + " rows but the fine grid has " +
                                 std::to_string(comps[k].n_fine()) + " cells");
    }
    if (penalty.lambdas.size() != d)
        throw DimensionError("PclmProblem: " + std::to_string(penalty.lambdas.size()) +
                             " smoothing parameters for " + std::to_string(d) + " dimensions");
    for (std::size_t k = 0; k < d; ++k)
        if (static_cast<std::size_t>(penalty.order) >= bases[k].cols())
            throw ValidationError("PclmProblem: penalty order " + std::to_string(penalty.order) +
                                  " too high for " + std::to_string(bases[k].cols()) +
                                  " coefficients in dimension " + std::to_string(k + 1));
    for (double v : y.values())
        if (v < 0.0 || !std::isfinite(v)) throw ValidationError("PclmProblem: counts must be finite and non-negative");

    if (exposures) {
        const auto m = fine_extents();
        if (exposures->dims() != m)
            throw DimensionError("PclmProblem: exposures are " + dims_to_string(exposures->dims()) +
                                 " but the fine grid is " + dims_to_string(m));
        for (double v : exposures->values())
            if (v < 0.0 || !std::isfinite(v))
                throw ValidationError("PclmProblem: exposures must be finite and non-negative");

        // Every group with a positive count needs at least one exposed cell;
        // a fully unexposed group cannot generate counts.
        NdArray grouped_e = aggregate(*exposures, comps);
        for (std::size_t g = 0; g < grouped_e.size(); ++g)
            if (grouped_e[g] <= 0.0 && y[g] > 0.0)
                throw ValidationError("PclmProblem: group at flat index " + std::to_string(g) +
                                      " has positive count but zero exposure everywhere");
    }
}

void SolverConfig::validate() const {
    if (!(tol_alpha > 0.0) || !(gamma_floor > 0.0))
        throw ValidationError("SolverConfig: tol_alpha and gamma_floor must be positive");
    if (tol_loglik < 0.0)
        throw ValidationError("SolverConfig: tol_loglik must be non-negative (0 disables the criterion)");
    if (max_iter < 1) throw ValidationError("SolverConfig: max_iter must be at least 1");
    if (max_step_halvings < 0) throw ValidationError("SolverConfig: max_step_halvings must be non-negative");
    if (element_budget == 0) throw ValidationError("SolverConfig: element_budget must be positive");
}

} // namespace pclm
