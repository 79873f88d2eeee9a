#include "pclm/composition.hpp"

#include <numeric>
#include <string>

#include "pclm/errors.hpp"
#include "pclm/glam.hpp"

namespace pclm {

CompositionMatrix CompositionMatrix::identity(std::size_t m) {
    std::vector<std::size_t> starts(m);
    std::iota(starts.begin(), starts.end(), std::size_t{0});
    return {DenseMatrix::identity(m), std::move(starts)};
}

CompositionMatrix build_composition(const GroupingDim& g, std::size_t m) {
    if (m == 0) throw ValidationError("build_composition: fine size must be positive");
    if (g.starts.empty()) throw ValidationError("build_composition: no groups given");
    if (g.starts.front() != 0)
        throw ValidationError("build_composition: first group must start at the first fine cell (gap before index " +
                              std::to_string(g.starts.front()) + ")");
    for (std::size_t r = 1; r < g.starts.size(); ++r)
        if (g.starts[r] <= g.starts[r - 1])
            throw ValidationError("build_composition: group starts must be strictly increasing (group " +
                                  std::to_string(r + 1) + " overlaps its predecessor)");
    if (g.starts.back() >= m)
        throw ValidationError("build_composition: group start " + std::to_string(g.starts.back()) +
                              " beyond fine size " + std::to_string(m));

    const std::size_t n = g.starts.size();
    DenseMatrix mat(n, m);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t lo = g.starts[r];
        const std::size_t hi = (r + 1 < n) ? g.starts[r + 1] : m;
        for (std::size_t i = lo; i < hi; ++i) mat(r, i) = 1.0;
    }
    return {std::move(mat), g.starts};
}

std::vector<CompositionMatrix> build_compositions(const GroupingSpec& spec, const std::vector<std::size_t>& m) {
    if (spec.dims.size() != m.size())
        throw DimensionError("build_compositions: " + std::to_string(spec.dims.size()) +
                             " grouping entries for " + std::to_string(m.size()) + " dimensions");
    std::vector<CompositionMatrix> comps;
    comps.reserve(m.size());
    for (std::size_t k = 0; k < m.size(); ++k) comps.push_back(build_composition(spec.dims[k], m[k]));
    return comps;
}

NdArray aggregate(const NdArray& fine, const std::vector<CompositionMatrix>& comps) {
    if (comps.size() != fine.ndim())
        throw DimensionError("aggregate: " + std::to_string(comps.size()) + " composition matrices for a " +
                             std::to_string(fine.ndim()) + "-dimensional array");
    std::vector<DenseMatrix> mats;
    mats.reserve(comps.size());
    for (const auto& c : comps) mats.push_back(c.matrix);
    return apply_tensor(mats, fine);
}

} // namespace pclm
