#include "pclm/naive.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "pclm/errors.hpp"
#include "pclm/uncertainty.hpp"

namespace pclm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double naive_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, const Eigen::VectorXd& gamma,
                    const Eigen::VectorXd& alpha, const DenseMatrix& penalty) {
    double ll = 0.0;
    for (Eigen::Index g = 0; g < y.size(); ++g) {
        if (y[g] > 0.0) {
            if (!(mu[g] > 0.0) || !std::isfinite(mu[g])) return -kInf;
            ll += y[g] * std::log(mu[g]);
        }
    }
    ll -= gamma.sum();
    ll -= 0.5 * alpha.dot(penalty.map() * alpha);
    return std::isfinite(ll) ? ll : -kInf;
}

struct NaiveState {
    Eigen::VectorXd eta, gamma, mu;
};

NaiveState eval_state(const Eigen::VectorXd& alpha, const DenseMatrix& b, const DenseMatrix& c,
                      const Eigen::VectorXd* exposures, double gamma_floor) {
    NaiveState s;
    s.eta = b.map() * alpha;
    s.gamma = s.eta.array().exp();
    if (exposures) s.gamma = s.gamma.cwiseProduct(*exposures);
    s.gamma = s.gamma.cwiseMax(gamma_floor);
    s.mu = c.map() * s.gamma;
    return s;
}

} // namespace

DenseMatrix build_full_kronecker(const std::vector<DenseMatrix>& mats, std::size_t element_budget) {
    if (mats.empty()) throw DimensionError("build_full_kronecker: no factors");
    std::size_t rows = 1, cols = 1;
    for (const auto& m : mats) {
        rows *= m.rows();
        cols *= m.cols();
    }
    if (rows * cols > element_budget)
        throw ResourceError("build_full_kronecker: result would be " + std::to_string(rows) + "x" +
                            std::to_string(cols) + " (" + std::to_string(rows * cols) +
                            " elements), over the budget of " + std::to_string(element_budget));
    DenseMatrix out = mats.back();
    for (std::size_t k = mats.size() - 1; k-- > 0;) out = kron(out, mats[k]);
    return out;
}

NaiveFit fit_naive(const PclmProblem& problem, const SolverConfig& config) {
    problem.validate();
    config.validate();

    const auto m_ext = problem.fine_extents();
    const auto n_ext = problem.group_extents();
    const auto c_ext = problem.coef_extents();
    const std::size_t m_total = product(m_ext);
    const std::size_t n_total = product(n_ext);
    const std::size_t c_total = product(c_ext);
    if (m_total * c_total > config.element_budget || n_total * m_total > config.element_budget)
        throw ResourceError("fit_naive: explicit model matrices would need " +
                            std::to_string(std::max(m_total * c_total, n_total * m_total)) +
                            " elements, over the budget of " + std::to_string(config.element_budget));

    std::vector<DenseMatrix> comp_mats;
    for (const auto& cm : problem.comps) comp_mats.push_back(cm.matrix);
    DenseMatrix b = build_full_kronecker(problem.bases, config.element_budget);
    DenseMatrix c = build_full_kronecker(comp_mats, config.element_budget);
    DenseMatrix penalty = build_penalty(c_ext, problem.penalty);

    Eigen::VectorXd y = problem.y.as_vector();
    Eigen::VectorXd exposures;
    const Eigen::VectorXd* e_ptr = nullptr;
    if (problem.exposures) {
        exposures = problem.exposures->as_vector();
        e_ptr = &exposures;
    }

    double denom = problem.exposures ? exposures.sum() : static_cast<double>(m_total);
    double alpha0 = std::log(std::max(y.sum(), 1e-300) / std::max(denom, 1e-300));
    Eigen::VectorXd alpha = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(c_total), alpha0);

    NaiveState state = eval_state(alpha, b, c, e_ptr, config.gamma_floor);
    double pen_ll = naive_loglik(y, state.mu, state.gamma, alpha, penalty);

    NaiveFit result;
    result.stop_reason = "max_iter";
    const double accept_slack = std::max(config.tol_loglik, 1e-13);

    // Explicitly tracked working buffers of the classic algorithm.
    DenseMatrix gamma_b(m_total, c_total);
    DenseMatrix b_breve(n_total, c_total);

    for (std::size_t iter = 1; iter <= config.max_iter; ++iter) {
        gamma_b.map() = state.gamma.asDiagonal() * b.map();
        b_breve.map().noalias() = c.map() * gamma_b.map();
        Eigen::VectorXd w = state.mu;
        b_breve.map() = w.cwiseInverse().asDiagonal() * b_breve.map();

        // Grouped-scale working response z = B-breve alpha + W^-1 (y - mu).
        Eigen::VectorXd z = b_breve.map() * alpha + w.cwiseInverse().asDiagonal() * (y - state.mu);

        Eigen::MatrixXd lhs = b_breve.map().transpose() * w.asDiagonal() * b_breve.map() + penalty.map();
        Eigen::VectorXd rhs = b_breve.map().transpose() * w.asDiagonal() * z;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(lhs);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            throw NumericalError("fit_naive: singular system at iteration " + std::to_string(iter));
        Eigen::VectorXd delta = ldlt.solve(rhs) - alpha;

        Eigen::VectorXd alpha_trial;
        NaiveState trial;
        double ll_trial = -kInf;
        // The scoring map can spiral on noisy problems (its expected-information
        // curvature differs from the observed one); half steps restore
        // contraction once plain iteration has clearly failed to settle.
        double scale = iter > 50 ? 0.5 : 1.0;
        int halvings = 0;
        bool accepted = false;
        for (; halvings <= config.max_step_halvings; ++halvings, scale *= 0.5) {
            alpha_trial = alpha + scale * delta;
            trial = eval_state(alpha_trial, b, c, e_ptr, config.gamma_floor);
            ll_trial = naive_loglik(y, trial.mu, trial.gamma, alpha_trial, penalty);
            if (ll_trial >= pen_ll - accept_slack * (1.0 + std::abs(pen_ll))) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            result.stop_reason = "stalled";
            break;
        }

        double max_step = (scale * delta).cwiseAbs().maxCoeff();
        double ll_prev = pen_ll;
        alpha = alpha_trial;
        state = trial;
        pen_ll = ll_trial;
        result.trace.push_back({pen_ll, max_step, halvings, 0.0});
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

    result.alpha_hat = NdArray(c_ext, std::vector<double>(alpha.data(), alpha.data() + alpha.size()));
    result.eta_hat = NdArray(m_ext, std::vector<double>(state.eta.data(), state.eta.data() + state.eta.size()));
    result.gamma_hat =
        NdArray(m_ext, std::vector<double>(state.gamma.data(), state.gamma.data() + state.gamma.size()));
    result.pen_loglik = pen_ll;
    result.b = std::move(b);
    result.c = std::move(c);
    return result;
}

DenseMatrix naive_covariance(const NaiveFit& nf, const PclmProblem& problem) {
    const auto c_ext = problem.coef_extents();
    DenseMatrix penalty = build_penalty(c_ext, problem.penalty);

    Eigen::VectorXd gamma = nf.gamma_hat.as_vector();
    Eigen::VectorXd mu = nf.c.map() * gamma;
    Eigen::MatrixXd gb = gamma.asDiagonal() * nf.b.map();
    Eigen::MatrixXd b_breve = mu.cwiseInverse().asDiagonal() * (nf.c.map() * gb);
    Eigen::MatrixXd lhs = b_breve.transpose() * mu.asDiagonal() * b_breve + penalty.map();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(lhs);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericalError("naive_covariance: information-plus-penalty matrix is singular");
    DenseMatrix v(nf.b.cols(), nf.b.cols());
    v.map() = ldlt.solve(Eigen::MatrixXd::Identity(lhs.rows(), lhs.cols()));
    v.map() = 0.5 * (v.map() + v.map().transpose()).eval();
    return v;
}

BenchmarkReport benchmark(const PclmProblem& problem, const SolverConfig& config,
                          const std::vector<std::string>& engines) {
    using clock = std::chrono::steady_clock;
    auto seconds_since = [](clock::time_point t0) {
        return std::chrono::duration<double>(clock::now() - t0).count();
    };

    BenchmarkReport report;
    NdArray glam_alpha, naive_alpha;
    DenseMatrix glam_v, naive_v;
    bool have_glam = false, have_naive = false;

    for (const auto& engine : engines) {
        EngineReport er;
        er.engine = engine;
        alloc_stats::reset();
        try {
            if (engine == "glam") {
                auto t0 = clock::now();
                FitResult fr = fit(problem, config);
                er.fit_seconds = seconds_since(t0);
                t0 = clock::now();
                VarianceResult vr = compute_variance(problem, fr);
                er.variance_seconds = seconds_since(t0);
                er.iterations = fr.iterations;
                er.converged = fr.converged;
                er.pen_loglik = fr.pen_loglik;
                er.status = "ok";
                glam_alpha = std::move(fr.alpha_hat);
                glam_v = std::move(vr.v);
                have_glam = true;
            } else if (engine == "naive") {
                auto t0 = clock::now();
                NaiveFit nf = fit_naive(problem, config);
                er.fit_seconds = seconds_since(t0);
                t0 = clock::now();
                naive_v = naive_covariance(nf, problem);
                er.variance_seconds = seconds_since(t0);
                er.iterations = nf.iterations;
                er.converged = nf.converged;
                er.pen_loglik = nf.pen_loglik;
                er.status = "ok";
                naive_alpha = std::move(nf.alpha_hat);
                have_naive = true;
            } else {
                er.status = "unknown engine";
            }
        } catch (const ResourceError& e) {
            er.status = std::string("skipped: ") + e.what();
        } catch (const Error& e) {
            er.status = std::string("failed: ") + e.what();
        }
        er.peak_elements = alloc_stats::peak_elements();
        report.engines.push_back(std::move(er));
    }

    if (have_glam && have_naive) {
        double d = 0.0;
        for (std::size_t i = 0; i < glam_alpha.size(); ++i)
            d = std::max(d, std::abs(glam_alpha[i] - naive_alpha[i]));
        report.alpha_discrepancy = d;
        double dv = 0.0;
        for (std::size_t i = 0; i < glam_v.size(); ++i) dv = std::max(dv, std::abs(glam_v.data()[i] - naive_v.data()[i]));
        report.covariance_discrepancy = dv;
    }
    return report;
}

} // namespace pclm
