#include "pclm/simulate.hpp"

#include <cmath>

#include "pclm/errors.hpp"

namespace pclm {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

std::vector<std::size_t> SyntheticScenario::extents() const {
    std::vector<std::size_t> m(coords.size());
    for (std::size_t k = 0; k < coords.size(); ++k) m[k] = coords[k].size();
    return m;
}

NdArray SyntheticScenario::eta_true() const {
    if (coords.empty() || coords.size() > 3)
        throw ValidationError("SyntheticScenario: 1 to 3 dimensions supported");
    NdArray eta(extents());
    std::vector<std::size_t> idx(coords.size(), 0);
    for (std::size_t flat = 0; flat < eta.size(); ++flat) {
        double v = -9.5 + 0.09 * coords[0][idx[0]];
        if (coords.size() > 1) v -= 0.012 * coords[1][idx[1]];
        if (coords.size() > 2) v += 0.15 * std::cos(kTwoPi * coords[2][idx[2]] / 52.0);
        eta[flat] = v;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (++idx[k] < coords[k].size()) break;
            idx[k] = 0;
        }
    }
    return eta;
}

NdArray SyntheticScenario::exposures() const {
    NdArray e(extents());
    std::vector<std::size_t> idx(coords.size(), 0);
    for (std::size_t flat = 0; flat < e.size(); ++flat) {
        const double a = (coords[0][idx[0]] - 40.0) / 30.0;
        e[flat] = 1e5 * std::exp(-0.5 * a * a);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (++idx[k] < coords[k].size()) break;
            idx[k] = 0;
        }
    }
    return e;
}

SyntheticScenario make_scenario(const std::vector<std::size_t>& extents, const std::vector<double>& start) {
    if (extents.size() != start.size())
        throw DimensionError("make_scenario: one start coordinate per dimension required");
    SyntheticScenario s;
    s.coords.resize(extents.size());
    for (std::size_t k = 0; k < extents.size(); ++k) {
        s.coords[k].resize(extents[k]);
        for (std::size_t i = 0; i < extents[k]; ++i) s.coords[k][i] = start[k] + static_cast<double>(i);
    }
    return s;
}

std::uint64_t sample_poisson(std::mt19937_64& rng, double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) throw ValidationError("sample_poisson: mean must be finite and >= 0");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uint64_t total = 0;
    // Split large means into chunks; a Poisson total is the sum of
    // independent Poisson chunks, and each chunk inverts quickly.
    constexpr double kChunk = 24.0;
    double remaining = mean;
    while (remaining > 0.0) {
        const double lam = remaining > kChunk ? kChunk : remaining;
        remaining = remaining > kChunk ? remaining - kChunk : 0.0;
        const double u = unif(rng);
        double p = std::exp(-lam);
        double cdf = p;
        std::uint64_t k = 0;
        const std::uint64_t k_max = static_cast<std::uint64_t>(lam + 20.0 * std::sqrt(lam) + 30.0);
        while (u > cdf && k < k_max) {
            ++k;
            p *= lam / static_cast<double>(k);
            cdf += p;
        }
        total += k;
    }
    return total;
}

SimulatedData simulate(const SyntheticScenario& scenario, const std::vector<CompositionMatrix>& comps,
                       std::uint64_t seed) {
    SimulatedData out;
    out.eta_true = scenario.eta_true();
    out.exposures = scenario.exposures();
    out.fine_counts = NdArray(scenario.extents());

    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < out.fine_counts.size(); ++i) {
        const double mean = out.exposures[i] * std::exp(out.eta_true[i]);
        out.fine_counts[i] = static_cast<double>(sample_poisson(rng, mean));
    }
    out.grouped_counts = aggregate(out.fine_counts, comps);
    // Aggregation of integer draws through 0/1 weights is exact: re-round to
    // keep the files integral.
    for (std::size_t g = 0; g < out.grouped_counts.size(); ++g)
        out.grouped_counts[g] = std::round(out.grouped_counts[g]);
    return out;
}

} // namespace pclm
