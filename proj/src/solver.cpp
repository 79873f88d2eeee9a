#include "pclm/solver.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "pclm/errors.hpp"
#include "pclm/glam.hpp"
#include "pclm/uncertainty.hpp"

namespace pclm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<DenseMatrix> comp_mats(const std::vector<CompositionMatrix>& comps, bool transpose) {
    std::vector<DenseMatrix> mats;
    mats.reserve(comps.size());
    for (const auto& c : comps) mats.push_back(transpose ? c.matrix.transposed() : c.matrix);
    return mats;
}

double loglik_from_parts(const NdArray& y, const NdArray& mu, const NdArray& gamma, const NdArray& alpha,
                         const DenseMatrix& penalty) {
    double ll = 0.0;
    for (std::size_t g = 0; g < y.size(); ++g) {
        if (y[g] > 0.0) {
            if (!(mu[g] > 0.0) || !std::isfinite(mu[g])) return -kInf;
            ll += y[g] * std::log(mu[g]);
        }
    }
    double total_gamma = gamma.sum();
    if (!std::isfinite(total_gamma)) return -kInf;
    ll -= total_gamma;
    auto a = alpha.as_vector();
    ll -= 0.5 * a.dot(penalty.map() * a);
    return std::isfinite(ll) ? ll : -kInf;
}

} // namespace

NdArray compute_eta(const NdArray& alpha, const std::vector<DenseMatrix>& bases) {
    return apply_tensor(bases, alpha);
}

NdArray compute_gamma(const NdArray& eta, const std::optional<NdArray>& exposures, double gamma_floor) {
    NdArray gamma(eta.dims());
    if (exposures && exposures->dims() != eta.dims())
        throw DimensionError("compute_gamma: exposures are " + dims_to_string(exposures->dims()) +
                             " but eta is " + dims_to_string(eta.dims()));
    for (std::size_t i = 0; i < eta.size(); ++i) {
        double g = std::exp(eta[i]);
        if (exposures) g *= (*exposures)[i];
        gamma[i] = std::max(g, gamma_floor);
    }
    return gamma;
}

NdArray compute_mu(const NdArray& gamma, const std::vector<CompositionMatrix>& comps) {
    return aggregate(gamma, comps);
}

NdArray working_latent_response(const NdArray& gamma, const NdArray& mu, const NdArray& y,
                                const std::vector<CompositionMatrix>& comps, double gamma_floor) {
    if (mu.dims() != y.dims())
        throw DimensionError("working_latent_response: mu is " + dims_to_string(mu.dims()) + " but y is " +
                             dims_to_string(y.dims()));
    NdArray ratio(y.dims());
    // Group sizes along the flat group index, for the degeneracy test.
    for (std::size_t g = 0; g < y.size(); ++g) {
        if (y[g] <= 0.0) {
            ratio[g] = 0.0;
            continue;
        }
        std::size_t cells = 1;
        std::size_t rem = g;
        for (std::size_t k = 0; k < comps.size(); ++k) {
            const std::size_t nk = comps[k].n_groups();
            cells *= comps[k].group_size(rem % nk);
            rem /= nk;
        }
        if (mu[g] <= gamma_floor * static_cast<double>(cells))
            throw NumericalError("working_latent_response: group at flat index " + std::to_string(g) +
                                 " has count " + std::to_string(y[g]) +
                                 " but its fitted mass is entirely at the clamp");
        ratio[g] = y[g] / mu[g];
    }
    NdArray spread = apply_tensor(comp_mats(comps, true), ratio);
    NdArray y_breve(gamma.dims());
    for (std::size_t i = 0; i < gamma.size(); ++i) y_breve[i] = spread[i] * gamma[i];
    return y_breve;
}

NdArray working_vector(const NdArray& eta, const NdArray& y_breve, const NdArray& gamma) {
    NdArray z(eta.dims());
    for (std::size_t i = 0; i < eta.size(); ++i) z[i] = eta[i] + (y_breve[i] - gamma[i]) / gamma[i];
    return z;
}

IrlsSystem build_system(const NdArray& gamma, const NdArray& z, const std::vector<DenseMatrix>& bases,
                        const DenseMatrix& penalty) {
    DenseMatrix lhs = weighted_inner_product(bases, gamma);
    if (lhs.rows() != penalty.rows())
        throw DimensionError("build_system: penalty is " + std::to_string(penalty.rows()) + "x" +
                             std::to_string(penalty.cols()) + " but the system is " +
                             std::to_string(lhs.rows()) + "-dimensional");
    lhs.map() += penalty.map();

    NdArray gz(gamma.dims());
    for (std::size_t i = 0; i < gamma.size(); ++i) gz[i] = gamma[i] * z[i];
    std::vector<DenseMatrix> bts;
    bts.reserve(bases.size());
    for (const auto& b : bases) bts.push_back(b.transposed());
    NdArray rhs_arr = apply_tensor(bts, gz);
    return {std::move(lhs), std::move(rhs_arr.values())};
}

double penalized_loglik(const NdArray& alpha, const PclmProblem& problem, const DenseMatrix& penalty,
                        double gamma_floor) {
    NdArray eta = compute_eta(alpha, problem.bases);
    NdArray gamma = compute_gamma(eta, problem.exposures, gamma_floor);
    NdArray mu = compute_mu(gamma, problem.comps);
    return loglik_from_parts(problem.y, mu, gamma, alpha, penalty);
}

FitResult fit(const PclmProblem& problem, const SolverConfig& config) {
    problem.validate();
    config.validate();

    const auto c = problem.coef_extents();
    const std::size_t n_coef = product(c);
    const DenseMatrix penalty = build_penalty(c, problem.penalty);

    // Constant start in the penalty nullspace: matches total counts to total
    // exposure (or to the fine-cell count without exposures).
    double denom = problem.exposures ? problem.exposures->sum()
                                     : static_cast<double>(product(problem.fine_extents()));
    double total_y = problem.y.sum();
    double alpha0 = std::log(std::max(total_y, 1e-300) / std::max(denom, 1e-300));
    NdArray alpha = NdArray::constant(c, alpha0);

    NdArray eta = compute_eta(alpha, problem.bases);
    NdArray gamma = compute_gamma(eta, problem.exposures, config.gamma_floor);
    NdArray mu = compute_mu(gamma, problem.comps);
    double pen_ll = loglik_from_parts(problem.y, mu, gamma, alpha, penalty);

    FitResult result;
    result.stop_reason = "max_iter";
    // Relative slack for accepting a step: tol_loglik, floored at roundoff
    // scale so tightened tolerances do not reject noise-level decreases.
    const double accept_slack = std::max(config.tol_loglik, 1e-13);

    for (std::size_t iter = 1; iter <= config.max_iter; ++iter) {
        NdArray y_breve = working_latent_response(gamma, mu, problem.y, problem.comps, config.gamma_floor);

        // Conservation diagnostic: redistributed counts re-aggregate to y.
        double redis_err = 0.0;
        {
            NdArray back = aggregate(y_breve, problem.comps);
            for (std::size_t g = 0; g < back.size(); ++g) {
                double denom_g = std::max(std::abs(problem.y[g]), 1.0);
                redis_err = std::max(redis_err, std::abs(back[g] - problem.y[g]) / denom_g);
            }
        }

        NdArray z = working_vector(eta, y_breve, gamma);
        IrlsSystem system = build_system(gamma, z, problem.bases, penalty);

        Eigen::LLT<Eigen::MatrixXd> llt(system.lhs.map());
        if (llt.info() != Eigen::Success)
            throw NumericalError("fit: system not positive definite at iteration " + std::to_string(iter));
        Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(system.rhs.data(), static_cast<Eigen::Index>(n_coef));
        Eigen::VectorXd alpha_new = llt.solve(rhs);

        Eigen::VectorXd delta = alpha_new - Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(n_coef));

        // Step halving: back off until the penalized log-likelihood stops
        // decreasing (beyond slack).
        NdArray alpha_trial(c);
        NdArray eta_trial(eta.dims()), gamma_trial(eta.dims());
        NdArray mu_trial(mu.dims());
        double ll_trial = -kInf;
        double scale = 1.0;
        int halvings = 0;
        bool accepted = false;
        for (; halvings <= config.max_step_halvings; ++halvings, scale *= 0.5) {
            alpha_trial.as_vector() = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(n_coef)) +
                                      scale * delta;
            eta_trial = compute_eta(alpha_trial, problem.bases);
            gamma_trial = compute_gamma(eta_trial, problem.exposures, config.gamma_floor);
            mu_trial = compute_mu(gamma_trial, problem.comps);
            ll_trial = loglik_from_parts(problem.y, mu_trial, gamma_trial, alpha_trial, penalty);
            if (ll_trial >= pen_ll - accept_slack * (1.0 + std::abs(pen_ll))) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // No fraction of the Newton step improves the objective: keep the
            // current iterate and stop.
            result.stop_reason = "stalled";
            break;
        }

        double max_step = (scale * delta).cwiseAbs().maxCoeff();
        double ll_prev = pen_ll;
        alpha = std::move(alpha_trial);
        eta = std::move(eta_trial);
        gamma = std::move(gamma_trial);
        mu = std::move(mu_trial);
        pen_ll = ll_trial;

        result.trace.push_back({pen_ll, max_step, halvings, redis_err});
        result.iterations = iter;

        if (max_step < config.tol_alpha) {
            result.converged = true;
            result.stop_reason = "alpha";
            break;
        }
        if (config.tol_loglik > 0.0 && std::isfinite(ll_prev) &&
            std::abs(pen_ll - ll_prev) < config.tol_loglik * (1.0 + std::abs(ll_prev))) {
            result.converged = true;
            result.stop_reason = "loglik";
            break;
        }
    }

    // Scoring polish: Newton steps on the grouped-information curvature,
    // assembled through the partial array route (compute_bgc), sharing the
    // main loop's fixed point. They collapse the slow within-group tail of
    // the working-response iteration in a handful of solves. The curvature
    // factorization is frozen between steps; a stale factor only slows the
    // contraction, the fixed point is pinned by the gradient alone.
    Eigen::LLT<Eigen::MatrixXd> polish_llt;
    int steps_since_rebuild = 1000; // force a build on entry
    for (std::size_t pit = 0; pit < config.max_polish; ++pit) {
        NdArray y_breve = working_latent_response(gamma, mu, problem.y, problem.comps, config.gamma_floor);
        double redis_err = 0.0;
        {
            NdArray back = aggregate(y_breve, problem.comps);
            for (std::size_t g = 0; g < back.size(); ++g)
                redis_err = std::max(redis_err,
                                     std::abs(back[g] - problem.y[g]) / std::max(std::abs(problem.y[g]), 1.0));
        }
        NdArray resid(gamma.dims());
        for (std::size_t i = 0; i < gamma.size(); ++i) resid[i] = y_breve[i] - gamma[i];
        std::vector<DenseMatrix> bts;
        bts.reserve(problem.bases.size());
        for (const auto& b : problem.bases) bts.push_back(b.transposed());
        Eigen::VectorXd grad = apply_tensor(bts, resid).as_vector();
        grad.noalias() -= penalty.map() * alpha.as_vector();

        if (steps_since_rebuild > 5) {
            DenseMatrix bgc = compute_bgc(problem.bases, problem.comps, gamma);
            Eigen::MatrixXd lhs = information_matrix(bgc, mu).map() + penalty.map();
            polish_llt.compute(lhs);
            if (polish_llt.info() != Eigen::Success) break; // polish is best-effort
            steps_since_rebuild = 0;
        }
        Eigen::VectorXd delta = polish_llt.solve(grad);

        NdArray alpha_trial(c);
        NdArray eta_trial(eta.dims()), gamma_trial(eta.dims()), mu_trial(mu.dims());
        double ll_trial = -kInf;
        double scale = pit > 6 ? 0.5 : 1.0; // damp late polish the same way scoring needs it
        int halvings = 0;
        bool accepted = false;
        for (; halvings <= config.max_step_halvings; ++halvings, scale *= 0.5) {
            alpha_trial.as_vector() = alpha.as_vector() + scale * delta;
            eta_trial = compute_eta(alpha_trial, problem.bases);
            gamma_trial = compute_gamma(eta_trial, problem.exposures, config.gamma_floor);
            mu_trial = compute_mu(gamma_trial, problem.comps);
            ll_trial = loglik_from_parts(problem.y, mu_trial, gamma_trial, alpha_trial, penalty);
            if (ll_trial >= pen_ll - accept_slack * (1.0 + std::abs(pen_ll))) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (steps_since_rebuild == 0) break; // a fresh factor failed: stop polishing
            steps_since_rebuild = 1000;          // rebuild here and retry
            continue;
        }
        const double max_step = (scale * delta).cwiseAbs().maxCoeff();
        // Freezing is only valid while gamma barely moves; a sizable step
        // invalidates the factor (curvature scales with e^step).
        if (halvings > 0 || max_step > 1e-2)
            steps_since_rebuild = 1000;
        else
            ++steps_since_rebuild;
        alpha = std::move(alpha_trial);
        eta = std::move(eta_trial);
        gamma = std::move(gamma_trial);
        mu = std::move(mu_trial);
        pen_ll = ll_trial;
        result.trace.push_back({pen_ll, max_step, halvings, redis_err});
        result.polish_iterations = pit + 1;
        if (max_step < config.tol_alpha) {
            result.converged = true;
            if (result.stop_reason == "max_iter" || result.stop_reason == "stalled") result.stop_reason = "polish";
            break;
        }
    }

    result.alpha_hat = std::move(alpha);
    result.eta_hat = std::move(eta);
    result.gamma_hat = std::move(gamma);
    result.pen_loglik = pen_ll;
    result.effective_dimension = std::numeric_limits<double>::quiet_NaN();
    return result;
}

double effective_dimension(const FitResult& fit_result, const PclmProblem& problem) {
    const auto c = problem.coef_extents();
    DenseMatrix penalty = build_penalty(c, problem.penalty);
    NdArray mu = compute_mu(fit_result.gamma_hat, problem.comps);
    DenseMatrix bgc = compute_bgc(problem.bases, problem.comps, fit_result.gamma_hat);
    DenseMatrix h0 = information_matrix(bgc, mu);

    Eigen::MatrixXd lhs = h0.map() + penalty.map();
    Eigen::LLT<Eigen::MatrixXd> llt(lhs);
    if (llt.info() != Eigen::Success)
        throw NumericalError("effective_dimension: H0 + P is not positive definite");
    return llt.solve(h0.map()).trace();
}

} // namespace pclm
