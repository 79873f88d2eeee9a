#include "pclm/app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>

#include <json.hpp>

#include "pclm/errors.hpp"
#include "pclm/io.hpp"
#include "pclm/simulate.hpp"

namespace pclm::app {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

/// Locates a value in a sorted coordinate list, with a small absolute-or-
/// relative tolerance for text round trips.
std::optional<std::size_t> find_coord(const std::vector<double>& coords, double v) {
    auto it = std::lower_bound(coords.begin(), coords.end(), v - 1e-9);
    if (it == coords.end()) return std::nullopt;
    const double tol = 1e-9 * std::max(1.0, std::abs(v));
    if (std::abs(*it - v) > tol) return std::nullopt;
    return static_cast<std::size_t>(it - coords.begin());
}

/// Reads a full-grid CSV (d coordinate columns + 1 value column) and returns
/// the per-dimension coordinates plus the value array, first index fastest.
struct GridFile {
    std::vector<std::vector<double>> coords;
    NdArray values;
};

GridFile read_grid_file(const std::string& path, std::size_t n_dims, const std::string& value_name) {
    io::Table table = io::read_csv(path);
    if (table.n_cols() != n_dims + 1)
        throw IoError(path + ": expected " + std::to_string(n_dims) + " coordinate columns plus '" + value_name +
                      "', found " + std::to_string(table.n_cols()) + " columns");

    GridFile out;
    out.coords.resize(n_dims);
    for (std::size_t k = 0; k < n_dims; ++k) {
        std::vector<double> vals;
        vals.reserve(table.rows.size());
        for (const auto& row : table.rows) vals.push_back(row[k]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        out.coords[k] = std::move(vals);
    }
    std::vector<std::size_t> extents(n_dims);
    std::size_t total = 1;
    for (std::size_t k = 0; k < n_dims; ++k) {
        extents[k] = out.coords[k].size();
        total *= extents[k];
    }
    if (table.rows.size() != total)
        throw IoError(path + ": grid is incomplete; " + std::to_string(total) + " coordinate combinations expected, " +
                      std::to_string(table.rows.size()) + " rows found");

    out.values = NdArray(extents);
    std::vector<char> seen(total, 0);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        std::size_t off = 0, stride = 1;
        for (std::size_t k = 0; k < n_dims; ++k) {
            auto idx = find_coord(out.coords[k], table.rows[r][k]);
            if (!idx)
                throw IoError(path + ": unmatched coordinate " + io::format_double(table.rows[r][k]) +
                              " in dimension " + std::to_string(k + 1));
            off += stride * *idx;
            stride *= extents[k];
        }
        if (seen[off])
            throw IoError(path + ": duplicate row for a coordinate combination (row " + std::to_string(r + 2) + ")");
        seen[off] = 1;
        out.values[off] = table.rows[r].back();
    }
    return out;
}

std::vector<std::string> coord_names(std::size_t d, const std::string& prefix) {
    std::vector<std::string> names(d);
    for (std::size_t k = 0; k < d; ++k) names[k] = prefix + std::to_string(k + 1);
    return names;
}

std::vector<std::size_t> bounds_to_starts(const std::vector<double>& bounds, const std::vector<double>& coords,
                                          std::size_t dim_index, const std::string& context) {
    std::vector<std::size_t> starts;
    starts.reserve(bounds.size());
    for (double b : bounds) {
        auto idx = find_coord(coords, b);
        if (!idx)
            throw ValidationError(context + ": group lower bound " + io::format_double(b) + " in dimension " +
                                  std::to_string(dim_index + 1) + " is not a fine-grid coordinate");
        starts.push_back(*idx);
    }
    if (starts.empty() || starts.front() != 0)
        throw ValidationError(context + ": dimension " + std::to_string(dim_index + 1) +
                              ": first group must start at the first fine coordinate");
    return starts;
}

/// Maps coordinate-valued group bounds onto the fine grid of every dimension.
GroupingSpec resolve_grouping(const std::vector<std::vector<double>>& bounds,
                              const std::vector<std::vector<double>>& coords, const std::string& context) {
    GroupingSpec spec;
    spec.dims.reserve(bounds.size());
    for (std::size_t k = 0; k < bounds.size(); ++k)
        spec.dims.push_back({bounds_to_starts(bounds[k], coords[k], k, context)});
    return spec;
}

json engine_report_json(const EngineReport& er) {
    return json{{"engine", er.engine},
                {"status", er.status},
                {"fit_seconds", er.fit_seconds},
                {"variance_seconds", er.variance_seconds},
                {"peak_elements", er.peak_elements},
                {"iterations", er.iterations},
                {"converged", er.converged},
                {"penalized_loglik", er.pen_loglik}};
}

} // namespace

double grouped_deviance(const NdArray& y, const NdArray& mu) {
    if (y.dims() != mu.dims()) throw DimensionError("grouped_deviance: extents differ");
    double dev = 0.0;
    for (std::size_t g = 0; g < y.size(); ++g) {
        double term = mu[g] - y[g];
        if (y[g] > 0.0) term += y[g] * std::log(y[g] / mu[g]);
        dev += 2.0 * term;
    }
    return dev;
}

ProblemBundle ingest(const RunConfig& config) {
    if (config.grouping_path.empty()) throw ValidationError("ingest: a grouping file is required");
    if (config.counts_path.empty()) throw ValidationError("ingest: a counts file is required");

    ProblemBundle bundle;
    bundle.group_bounds = io::read_grouping(config.grouping_path);
    const std::size_t d = bundle.group_bounds.size();

    if (config.basis_sizes.size() != d)
        throw ValidationError("ingest: " + std::to_string(config.basis_sizes.size()) +
                              " basis sizes for " + std::to_string(d) + " grouping dimensions");
    if (config.lambdas.size() != d)
        throw ValidationError("ingest: " + std::to_string(config.lambdas.size()) + " lambdas for " +
                              std::to_string(d) + " dimensions");

    // Fine grid: from the exposures file when present, otherwise unit-spaced
    // from the first group bound with user-supplied extents.
    std::optional<NdArray> exposures;
    if (!config.exposures_path.empty()) {
        GridFile grid = read_grid_file(config.exposures_path, d, "exposure");
        bundle.fine_coords = std::move(grid.coords);
        exposures = std::move(grid.values);
    } else {
        if (config.fine_count.size() != d)
            throw ValidationError("ingest: without exposures, fine-count must list the fine cells per dimension");
        bundle.fine_coords.resize(d);
        for (std::size_t k = 0; k < d; ++k) {
            bundle.fine_coords[k].resize(config.fine_count[k]);
            for (std::size_t i = 0; i < config.fine_count[k]; ++i)
                bundle.fine_coords[k][i] = bundle.group_bounds[k].front() + static_cast<double>(i);
        }
    }

    PclmProblem& problem = bundle.problem;
    problem.exposures = std::move(exposures);
    std::vector<std::size_t> fine_sizes(d);
    for (std::size_t k = 0; k < d; ++k) fine_sizes[k] = bundle.fine_coords[k].size();
    problem.comps = build_compositions(resolve_grouping(bundle.group_bounds, bundle.fine_coords, "ingest"),
                                       fine_sizes);

    // Grouped counts: one group-label column per dimension holding the lower
    // bound, plus the count. Every combination must appear exactly once.
    {
        io::Table table = io::read_csv(config.counts_path);
        if (table.n_cols() != d + 1)
            throw IoError(config.counts_path + ": expected " + std::to_string(d) +
                          " group-label columns plus 'count'");
        std::vector<std::size_t> n_ext(d);
        std::size_t total = 1;
        for (std::size_t k = 0; k < d; ++k) {
            n_ext[k] = bundle.group_bounds[k].size();
            total *= n_ext[k];
        }
        if (table.rows.size() != total)
            throw IoError(config.counts_path + ": expected one row per group combination (" + std::to_string(total) +
                          "), found " + std::to_string(table.rows.size()));
        NdArray y(n_ext);
        std::vector<char> seen(total, 0);
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            std::size_t off = 0, stride = 1;
            for (std::size_t k = 0; k < d; ++k) {
                auto idx = find_coord(bundle.group_bounds[k], table.rows[r][k]);
                if (!idx)
                    throw IoError(config.counts_path + ": unknown group label " +
                                  io::format_double(table.rows[r][k]) + " in dimension " + std::to_string(k + 1) +
                                  " (row " + std::to_string(r + 2) + ")");
                off += stride * *idx;
                stride *= n_ext[k];
            }
            if (seen[off])
                throw IoError(config.counts_path + ": duplicate group combination at row " + std::to_string(r + 2));
            seen[off] = 1;
            y[off] = table.rows[r].back();
        }
        problem.y = std::move(y);
    }

    for (std::size_t k = 0; k < d; ++k) {
        if (config.basis_sizes[k] <= static_cast<std::size_t>(config.degree))
            throw ValidationError("ingest: basis size in dimension " + std::to_string(k + 1) +
                                  " must exceed the degree");
        const auto& coords = bundle.fine_coords[k];
        BasisSpec spec{coords.front(), coords.back(), config.basis_sizes[k] - static_cast<std::size_t>(config.degree),
                       config.degree};
        problem.bases.push_back(build_bspline_basis(spec, coords));
    }
    problem.penalty = PenaltySpec{config.lambdas, config.porder};
    problem.validate();
    return bundle;
}

namespace {

FitOutputs fit_and_write(const RunConfig& config, const ProblemBundle& bundle,
                         const std::vector<double>& lambdas) {
    PclmProblem problem = bundle.problem;
    problem.penalty.lambdas = lambdas;

    FitOutputs out;
    auto t0 = clock_type::now();
    if (config.engine == "glam") {
        out.fit = fit(problem, config.solver);
    } else if (config.engine == "naive") {
        NaiveFit nf = fit_naive(problem, config.solver);
        out.fit.alpha_hat = std::move(nf.alpha_hat);
        out.fit.eta_hat = std::move(nf.eta_hat);
        out.fit.gamma_hat = std::move(nf.gamma_hat);
        out.fit.iterations = nf.iterations;
        out.fit.converged = nf.converged;
        out.fit.pen_loglik = nf.pen_loglik;
        out.fit.trace = std::move(nf.trace);
        out.fit.stop_reason = std::move(nf.stop_reason);
    } else {
        throw ValidationError("unknown engine '" + config.engine + "' (use glam or naive)");
    }
    out.fit_seconds = seconds_since(t0);

    t0 = clock_type::now();
    out.variance = compute_variance(problem, out.fit, config.level);
    out.fit.effective_dimension = out.variance.ed;
    out.variance_seconds = seconds_since(t0);

    ensure_out_dir(config.out_dir);
    const std::size_t d = problem.n_dims();
    const NdArray& eta = out.fit.eta_hat;
    NdArray rate(eta.dims());
    for (std::size_t i = 0; i < eta.size(); ++i) {
        if (problem.exposures && (*problem.exposures)[i] > 0.0)
            rate[i] = out.fit.gamma_hat[i] / (*problem.exposures)[i];
        else
            rate[i] = std::exp(eta[i]);
    }

    out.estimates_path = join_path(config.out_dir, "estimates.csv");
    io::write_grid_csv_multi(out.estimates_path, bundle.fine_coords, coord_names(d, "x"),
                             {&eta, &out.variance.se_eta, &out.fit.gamma_hat, &rate, &out.variance.ci_lower,
                              &out.variance.ci_upper},
                             {"eta_hat", "se_eta", "gamma_hat", "rate", "ci_lower", "ci_upper"});

    NdArray mu = compute_mu(out.fit.gamma_hat, problem.comps);
    json report{{"engine", config.engine},
                {"m", problem.fine_extents()},
                {"n", problem.group_extents()},
                {"c", problem.coef_extents()},
                {"lambda", lambdas},
                {"degree", config.degree},
                {"porder", config.porder},
                {"level", config.level},
                {"iterations", out.fit.iterations},
                {"converged", out.fit.converged},
                {"stop_reason", out.fit.stop_reason},
                {"penalized_loglik", out.fit.pen_loglik},
                {"effective_dimension", out.fit.effective_dimension},
                {"deviance", grouped_deviance(problem.y, mu)},
                {"fit_seconds", out.fit_seconds},
                {"variance_seconds", out.variance_seconds},
                {"estimates", out.estimates_path}};
    out.report_path = join_path(config.out_dir, "report.json");
    io::write_text(out.report_path, report.dump(2) + "\n");
    return out;
}

} // namespace

FitOutputs run_fit(const RunConfig& config) {
    ProblemBundle bundle = ingest(config);
    return fit_and_write(config, bundle, config.lambdas);
}

GridSearchOutputs grid_search(const RunConfig& config) {
    RunConfig base = config;
    if (base.grouping_path.empty()) throw ValidationError("grid_search: a grouping file is required");
    const std::size_t n_grouped_dims = io::read_grouping(base.grouping_path).size();
    if (base.lambdas.empty()) {
        // ingest() wants a lambda per dimension; actual values come from the grid.
        base.lambdas.assign(n_grouped_dims, 1.0);
    }
    ProblemBundle bundle = ingest(base);
    const std::size_t d = bundle.problem.n_dims();

    std::vector<std::vector<double>> grid = config.lambda_grid;
    if (grid.empty()) grid.assign(1, config.lambdas);
    if (grid.size() == 1 && d > 1) grid.assign(d, grid.front());
    if (grid.size() != d)
        throw ValidationError("grid_search: " + std::to_string(grid.size()) + " lambda lists for " +
                              std::to_string(d) + " dimensions");
    for (const auto& axis : grid)
        if (axis.empty()) throw ValidationError("grid_search: empty lambda list");

    GridSearchOutputs out;
    std::vector<std::size_t> idx(d, 0);
    bool done = false;
    while (!done) {
        std::vector<double> lam(d);
        for (std::size_t k = 0; k < d; ++k) lam[k] = grid[k][idx[k]];

        GridPoint point;
        point.lambdas = lam;
        PclmProblem problem = bundle.problem;
        problem.penalty.lambdas = lam;
        FitResult fr = fit(problem, config.solver);
        point.converged = fr.converged;
        point.iterations = fr.iterations;
        if (fr.converged) {
            NdArray mu = compute_mu(fr.gamma_hat, problem.comps);
            point.deviance = grouped_deviance(problem.y, mu);
            point.ed = compute_variance(problem, fr).ed;
            point.aic = point.deviance + 2.0 * point.ed;
        }
        out.points.push_back(std::move(point));

        done = true;
        for (std::size_t k = 0; k < d; ++k) {
            if (++idx[k] < grid[k].size()) {
                done = false;
                break;
            }
            idx[k] = 0;
        }
    }

    const GridPoint* best = nullptr;
    for (const auto& p : out.points) {
        if (!p.converged) continue;
        if (!best || p.aic < best->aic) {
            best = &p;
        } else if (p.aic == best->aic) {
            double prod_p = 1.0, prod_b = 1.0;
            for (double l : p.lambdas) prod_p *= l;
            for (double l : best->lambdas) prod_b *= l;
            if (prod_p > prod_b) best = &p; // prefer the smoother fit on ties
        }
    }
    if (!best) throw NumericalError("grid_search: no lambda tuple converged");
    out.best = *best;

    ensure_out_dir(config.out_dir);
    json points_json = json::array();
    for (const auto& p : out.points) {
        json pj{{"lambda", p.lambdas}, {"converged", p.converged}, {"iterations", p.iterations}};
        if (p.converged) {
            pj["deviance"] = p.deviance;
            pj["ed"] = p.ed;
            pj["aic"] = p.aic;
        }
        points_json.push_back(std::move(pj));
    }
    json report{{"points", points_json},
                {"best", {{"lambda", out.best.lambdas}, {"deviance", out.best.deviance}, {"ed", out.best.ed},
                          {"aic", out.best.aic}}}};
    out.grid_report_path = join_path(config.out_dir, "grid_report.json");
    io::write_text(out.grid_report_path, report.dump(2) + "\n");

    RunConfig best_cfg = config;
    best_cfg.lambdas = out.best.lambdas;
    out.best_fit = fit_and_write(best_cfg, bundle, out.best.lambdas);
    return out;
}

SimulateOutputs run_simulate(const RunConfig& config) {
    if (config.grouping_path.empty()) throw ValidationError("simulate: a grouping file is required");
    if (config.dims.empty()) throw ValidationError("simulate: fine extents (--dims) are required");

    auto bounds = io::read_grouping(config.grouping_path);
    const std::size_t d = bounds.size();
    if (config.dims.size() != d)
        throw ValidationError("simulate: " + std::to_string(config.dims.size()) + " extents for " +
                              std::to_string(d) + " grouping dimensions");

    std::vector<double> start(d);
    for (std::size_t k = 0; k < d; ++k) start[k] = bounds[k].front();
    SyntheticScenario scenario = make_scenario(config.dims, start);

    std::vector<CompositionMatrix> comps =
        build_compositions(resolve_grouping(bounds, scenario.coords, "simulate"), config.dims);

    SimulatedData data = simulate(scenario, comps, config.seed);

    ensure_out_dir(config.out_dir);
    SimulateOutputs out;
    out.counts_path = join_path(config.out_dir, "counts.csv");
    out.exposures_path = join_path(config.out_dir, "exposures.csv");
    out.truth_path = join_path(config.out_dir, "truth.csv");
    io::write_grid_csv(out.counts_path, bounds, coord_names(d, "g"), data.grouped_counts, "count", true);
    io::write_grid_csv(out.exposures_path, scenario.coords, coord_names(d, "x"), data.exposures, "exposure");
    io::write_grid_csv(out.truth_path, scenario.coords, coord_names(d, "x"), data.eta_true, "eta_true");
    return out;
}

std::string run_aggregate(const RunConfig& config) {
    if (config.fine_path.empty()) throw ValidationError("aggregate: a fine counts file is required");
    if (config.grouping_path.empty()) throw ValidationError("aggregate: a grouping file is required");

    auto bounds = io::read_grouping(config.grouping_path);
    const std::size_t d = bounds.size();
    GridFile grid = read_grid_file(config.fine_path, d, "count");

    std::vector<std::size_t> fine_sizes(d);
    for (std::size_t k = 0; k < d; ++k) fine_sizes[k] = grid.coords[k].size();
    NdArray grouped =
        aggregate(grid.values, build_compositions(resolve_grouping(bounds, grid.coords, "aggregate"), fine_sizes));

    ensure_out_dir(config.out_dir);
    std::string path = join_path(config.out_dir, "grouped.csv");
    io::write_grid_csv(path, bounds, coord_names(d, "g"), grouped, "count");
    return path;
}

BenchmarkReport run_benchmark(const RunConfig& config) {
    ProblemBundle bundle = ingest(config);
    BenchmarkReport report = benchmark(bundle.problem, config.solver, config.engines);

    ensure_out_dir(config.out_dir);
    json engines_json = json::array();
    for (const auto& er : report.engines) engines_json.push_back(engine_report_json(er));
    json j{{"engines", engines_json},
           {"alpha_discrepancy", report.alpha_discrepancy},
           {"covariance_discrepancy", report.covariance_discrepancy}};
    io::write_text(join_path(config.out_dir, "benchmark.json"), j.dump(2) + "\n");
    return report;
}

} // namespace pclm::app
