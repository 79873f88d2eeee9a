#include "pclm/basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pclm/errors.hpp"

namespace pclm {

DenseMatrix build_bspline_basis(const BasisSpec& spec, std::span<const double> x) {
    if (!(spec.xmin < spec.xmax)) throw ValidationError("BasisSpec: xmin must be below xmax");
    if (spec.n_intervals < 1) throw ValidationError("BasisSpec: n_intervals must be at least 1");
    if (spec.degree < 0) throw ValidationError("BasisSpec: degree must be non-negative");
    if (x.empty()) throw ValidationError("build_bspline_basis: empty coordinate list");

    const int p = spec.degree;
    const std::size_t nint = spec.n_intervals;
    const std::size_t c = spec.n_basis();
    const double h = (spec.xmax - spec.xmin) / static_cast<double>(nint);
    const double slack = 1e-9 * (spec.xmax - spec.xmin);

    // Equally spaced knots, extended p intervals beyond each boundary:
    // t_i = xmin + (i - p) h for i = 0 .. nint + 2p.
    std::vector<double> t(nint + 2 * static_cast<std::size_t>(p) + 1);
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = spec.xmin + (static_cast<double>(i) - static_cast<double>(p)) * h;

    DenseMatrix basis(x.size(), c);
    std::vector<double> val(static_cast<std::size_t>(p) + 1);
    std::vector<double> left(static_cast<std::size_t>(p) + 1), right(static_cast<std::size_t>(p) + 1);

    for (std::size_t row = 0; row < x.size(); ++row) {
        const double xi = x[row];
        if (xi < spec.xmin - slack || xi > spec.xmax + slack)
            throw ValidationError("build_bspline_basis: coordinate " + std::to_string(xi) +
                                  " outside [" + std::to_string(spec.xmin) + ", " + std::to_string(spec.xmax) + "]");
        // Interval index, with the right boundary folded into the last interval.
        auto l = static_cast<std::ptrdiff_t>(std::floor((xi - spec.xmin) / h));
        l = std::clamp<std::ptrdiff_t>(l, 0, static_cast<std::ptrdiff_t>(nint) - 1);
        const std::size_t s = static_cast<std::size_t>(l) + static_cast<std::size_t>(p); // knot span: t[s] <= x < t[s+1]

        // de Boor's evaluation of the p + 1 B-splines that are nonzero on span s.
        val[0] = 1.0;
        for (int j = 1; j <= p; ++j) {
            left[j] = xi - t[s + 1 - static_cast<std::size_t>(j)];
            right[j] = t[s + static_cast<std::size_t>(j)] - xi;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                const double tmp = val[r] / (right[r + 1] + left[j - r]);
                val[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            val[j] = saved;
        }
        for (int r = 0; r <= p; ++r) basis(row, s - static_cast<std::size_t>(p) + static_cast<std::size_t>(r)) = val[r];
    }
    return basis;
}

DenseMatrix build_difference_matrix(std::size_t c, int order) {
    if (order < 1) throw ValidationError("build_difference_matrix: order must be at least 1");
    if (static_cast<std::size_t>(order) >= c)
        throw DimensionError("build_difference_matrix: order " + std::to_string(order) +
                             " requires more than " + std::to_string(c) + " coefficients");
    auto first_diff = [](std::size_t n) {
        DenseMatrix d(n - 1, n);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            d(i, i) = -1.0;
            d(i, i + 1) = 1.0;
        }
        return d;
    };
    DenseMatrix d = first_diff(c);
    for (int k = 1; k < order; ++k) {
        DenseMatrix next = first_diff(c - static_cast<std::size_t>(k));
        DenseMatrix prod(next.rows(), d.cols());
        prod.map().noalias() = next.map() * d.map();
        d = std::move(prod);
    }
    return d;
}

DenseMatrix build_penalty(const std::vector<std::size_t>& c, const PenaltySpec& spec) {
    if (spec.lambdas.size() != c.size())
        throw DimensionError("build_penalty: " + std::to_string(spec.lambdas.size()) +
                             " smoothing parameters for " + std::to_string(c.size()) + " dimensions");
    for (double l : spec.lambdas)
        if (l < 0.0 || !std::isfinite(l))
            throw ValidationError("build_penalty: smoothing parameters must be finite and non-negative");

    const std::size_t total = product(c);
    DenseMatrix penalty(total, total);
    for (std::size_t k = 0; k < c.size(); ++k) {
        if (spec.lambdas[k] == 0.0) continue;
        DenseMatrix d = build_difference_matrix(c[k], spec.order);
        DenseMatrix dtd(c[k], c[k]);
        dtd.map().noalias() = d.map().transpose() * d.map();
        // lambda_k I (x) ... (x) D'D (x) ... (x) I, with D'D in slot k from the right.
        DenseMatrix block = dtd;
        for (std::size_t j = 0; j < k; ++j) block = kron(block, DenseMatrix::identity(c[j]));
        for (std::size_t j = k + 1; j < c.size(); ++j) block = kron(DenseMatrix::identity(c[j]), block);
        penalty.map() += spec.lambdas[k] * block.map();
    }
    return penalty;
}

} // namespace pclm
