#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pclm/composition.hpp"
#include "pclm/nd_array.hpp"

namespace pclm {

/// Synthetic mortality-like scenario on a fine grid with per-dimension
/// coordinates. The latent log-rate is linear in the first two coordinates
/// with an optional weekly seasonal term in a third:
///
///   eta(x) = -9.5 + 0.09 x1 - 0.012 x2 [+ 0.15 cos(2 pi x3 / 52)]
///   e(x)   = 1e5 exp(-((x1 - 40) / 30)^2 / 2)
///
/// The formulas are fixed so recovery tests stay stable.
struct SyntheticScenario {
    std::vector<std::vector<double>> coords; // fine coordinates per dimension

    std::vector<std::size_t> extents() const;
    NdArray eta_true() const;
    NdArray exposures() const;
};

/// Unit-spaced coordinates: extents[k] values starting at start[k].
SyntheticScenario make_scenario(const std::vector<std::size_t>& extents, const std::vector<double>& start);

/// Exact Poisson sampling by chunked CDF inversion: portable and
/// reproducible for a given generator state, unlike std::poisson_distribution.
std::uint64_t sample_poisson(std::mt19937_64& rng, double mean);

struct SimulatedData {
    NdArray fine_counts;    // m-grid draws
    NdArray grouped_counts; // aggregated to the grouping
    NdArray exposures;      // m-grid
    NdArray eta_true;       // m-grid
};

/// Draws Poisson counts cell by cell in flat order (deterministic for a
/// seed) and aggregates them through the composition matrices.
SimulatedData simulate(const SyntheticScenario& scenario, const std::vector<CompositionMatrix>& comps,
                       std::uint64_t seed);

} // namespace pclm
