#pragma once

#include <vector>

#include "pclm/nd_array.hpp"

namespace pclm {

/// Contiguous, disjoint, exhaustive grouping of the fine indices 0..m-1 of
/// one dimension, given by 0-based group start indices (first entry 0).
struct GroupingDim {
    std::vector<std::size_t> starts;

    std::size_t n_groups() const { return starts.size(); }
};

/// One grouping entry per dimension.
struct GroupingSpec {
    std::vector<GroupingDim> dims;
};

/// Marginal composition matrix: n x m of zeros and ones, row r flags the fine
/// cells of group r; every column holds exactly one 1.
struct CompositionMatrix {
    DenseMatrix matrix;               // n x m
    std::vector<std::size_t> starts;  // group start indices, 0-based

    std::size_t n_groups() const { return matrix.rows(); }
    std::size_t n_fine() const { return matrix.cols(); }
    std::size_t group_size(std::size_t r) const {
        return (r + 1 < starts.size() ? starts[r + 1] : n_fine()) - starts[r];
    }

    static CompositionMatrix identity(std::size_t m);
};

/// Builds the composition matrix for one dimension, validating that the
/// starts describe a partition of 0..m-1 with no overlap and no gap.
CompositionMatrix build_composition(const GroupingDim& g, std::size_t m);

/// One composition matrix per dimension of the grouping.
std::vector<CompositionMatrix> build_compositions(const GroupingSpec& spec, const std::vector<std::size_t>& m);

/// Aggregates a fine array to group resolution by applying the composition
/// matrices along every dimension; totals are preserved.
NdArray aggregate(const NdArray& fine, const std::vector<CompositionMatrix>& comps);

} // namespace pclm
