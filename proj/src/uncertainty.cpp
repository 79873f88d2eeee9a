#include "pclm/uncertainty.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "pclm/errors.hpp"
#include "pclm/glam.hpp"

namespace pclm {

DenseMatrix compute_bgc(const std::vector<DenseMatrix>& bases, const std::vector<CompositionMatrix>& comps,
                        const NdArray& gamma) {
    const std::size_t d = gamma.ndim();
    if (bases.size() != d || comps.size() != d)
        throw DimensionError("compute_bgc: need one basis and one composition matrix per dimension");
    std::vector<DenseMatrix> factors;
    std::vector<std::size_t> c(d), n(d);
    factors.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        if (bases[k].rows() != gamma.dim(k) || comps[k].n_fine() != gamma.dim(k))
            throw DimensionError("compute_bgc: extent mismatch in dimension " + std::to_string(k + 1));
        // G(B_k, C_k')' of size (c_k n_k) x m_k; columns of B vary slowly in
        // the fused index, which rearrange_pairs assumes.
        factors.push_back(row_tensor(bases[k], comps[k].matrix.transposed()).transposed());
        c[k] = bases[k].cols();
        n[k] = comps[k].n_groups();
    }
    return rearrange_pairs(apply_tensor(factors, gamma), c, n);
}

DenseMatrix information_matrix(const DenseMatrix& bgc, const NdArray& mu, double mu_floor) {
    if (bgc.cols() != mu.size())
        throw DimensionError("information_matrix: bgc has " + std::to_string(bgc.cols()) +
                             " columns but mu has " + std::to_string(mu.size()) + " groups");
    DenseMatrix weighted = bgc;
    auto w = weighted.map();
    for (std::size_t g = 0; g < mu.size(); ++g) {
        const double wg = mu[g] > mu_floor ? 1.0 / mu[g] : 0.0;
        w.col(static_cast<Eigen::Index>(g)) *= wg;
    }
    DenseMatrix h0(bgc.rows(), bgc.rows());
    h0.map().noalias() = w * bgc.map().transpose();
    // Symmetrize away the product roundoff.
    h0.map() = 0.5 * (h0.map() + h0.map().transpose()).eval();
    return h0;
}

DenseMatrix compute_v(const DenseMatrix& bgc, const NdArray& mu, const DenseMatrix& penalty, double mu_floor) {
    DenseMatrix h0 = information_matrix(bgc, mu, mu_floor);
    if (penalty.rows() != h0.rows() || penalty.cols() != h0.cols())
        throw DimensionError("compute_v: penalty shape does not match the information matrix");
    Eigen::MatrixXd lhs = h0.map() + penalty.map();
    Eigen::LLT<Eigen::MatrixXd> llt(lhs);
    if (llt.info() != Eigen::Success)
        throw NumericalError("compute_v: information-plus-penalty matrix is not positive definite");
    DenseMatrix v(h0.rows(), h0.cols());
    v.map() = llt.solve(Eigen::MatrixXd::Identity(lhs.rows(), lhs.cols()));
    v.map() = 0.5 * (v.map() + v.map().transpose()).eval();
    return v;
}

NdArray diag_bvb(const DenseMatrix& v, const std::vector<DenseMatrix>& bases) {
    std::vector<std::size_t> c(bases.size());
    for (std::size_t k = 0; k < bases.size(); ++k) c[k] = bases[k].cols();
    if (v.rows() != product(c) || v.cols() != v.rows())
        throw DimensionError("diag_bvb: V must be square of size prod(c_k)");

    NdArray vstar = rearrange_v(v, c);
    std::vector<DenseMatrix> g;
    g.reserve(bases.size());
    for (const auto& b : bases) g.push_back(row_tensor(b, b));
    NdArray diag = apply_tensor(g, vstar);
    for (std::size_t i = 0; i < diag.size(); ++i) {
        if (diag[i] < -1e-10)
            throw NumericalError("diag_bvb: negative variance " + std::to_string(diag[i]) + " at flat index " +
                                 std::to_string(i));
        if (diag[i] < 0.0) diag[i] = 0.0;
    }
    return diag;
}

void confidence_intervals(const NdArray& eta_hat, const NdArray& se_eta, double level, NdArray& lower,
                          NdArray& upper) {
    if (!(level > 0.0 && level < 1.0))
        throw ValidationError("confidence_intervals: level must lie strictly between 0 and 1");
    if (eta_hat.dims() != se_eta.dims())
        throw DimensionError("confidence_intervals: eta and se extents differ");
    const double z = normal_quantile(0.5 + level / 2.0);
    lower = NdArray(eta_hat.dims());
    upper = NdArray(eta_hat.dims());
    for (std::size_t i = 0; i < eta_hat.size(); ++i) {
        lower[i] = std::exp(eta_hat[i] - z * se_eta[i]);
        upper[i] = std::exp(eta_hat[i] + z * se_eta[i]);
    }
}

VarianceResult compute_variance(const PclmProblem& problem, const FitResult& fit_result, double level) {
    const auto c = problem.coef_extents();
    DenseMatrix penalty = build_penalty(c, problem.penalty);
    NdArray mu = compute_mu(fit_result.gamma_hat, problem.comps);
    DenseMatrix bgc = compute_bgc(problem.bases, problem.comps, fit_result.gamma_hat);

    VarianceResult out;
    out.level = level;
    out.v = compute_v(bgc, mu, penalty);
    out.ed = static_cast<double>(out.v.rows()) - (out.v.map() * penalty.map()).trace();
    NdArray var_eta = diag_bvb(out.v, problem.bases);
    out.se_eta = NdArray(var_eta.dims());
    for (std::size_t i = 0; i < var_eta.size(); ++i) out.se_eta[i] = std::sqrt(var_eta[i]);
    confidence_intervals(fit_result.eta_hat, out.se_eta, level, out.ci_lower, out.ci_upper);
    return out;
}

// Wichura's AS 241 (PPND16) rational approximations.
double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile: p must lie strictly between 0 and 1");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r + 6.7265770927008700853e4) * r +
                    4.5921953931549871457e4) * r + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                  1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r + 3.9307895800092710610e4) * r +
                    2.1213794301586595867e4) * r + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
                   1.27045825245236838258e0) * r + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
                   1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
                   2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
                   7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

} // namespace pclm
