#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pclm/naive.hpp"
#include "pclm/problem.hpp"
#include "pclm/solver.hpp"
#include "pclm/uncertainty.hpp"

namespace pclm::app {

/// Everything a batch run needs. Populated from command-line flags and/or a
/// flat key = value config file; flags win.
struct RunConfig {
    std::string counts_path;
    std::string exposures_path;
    std::string grouping_path;
    std::string fine_path;   // aggregate subcommand input
    std::string out_dir = ".";

    std::vector<std::size_t> basis_sizes; // B-splines per dimension
    int degree = 3;
    int porder = 2;
    std::vector<double> lambdas;
    std::vector<std::vector<double>> lambda_grid; // per-dimension candidate lists
    double level = 0.95;
    std::string engine = "glam";
    std::uint64_t seed = 1;
    std::vector<std::size_t> dims;       // simulate: fine extents
    std::vector<std::size_t> fine_count; // ingest without exposures: fine extents

    SolverConfig solver;
    std::vector<std::string> engines{"glam", "naive"}; // benchmark
};

/// A validated problem plus the fine-grid coordinates and group lower bounds
/// it was built from (needed for output files).
struct ProblemBundle {
    PclmProblem problem;
    std::vector<std::vector<double>> fine_coords;
    std::vector<std::vector<double>> group_bounds;
};

/// Reads, cross-checks and assembles the problem from the configured files.
ProblemBundle ingest(const RunConfig& config);

struct FitOutputs {
    FitResult fit;
    VarianceResult variance;
    double fit_seconds = 0.0;
    double variance_seconds = 0.0;
    std::string estimates_path;
    std::string report_path;
};

/// Fits with the selected engine, runs the uncertainty pass once, and writes
/// estimates.csv plus report.json under out_dir.
FitOutputs run_fit(const RunConfig& config);

struct GridPoint {
    std::vector<double> lambdas;
    double deviance = 0.0;
    double ed = 0.0;
    double aic = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

struct GridSearchOutputs {
    std::vector<GridPoint> points;
    GridPoint best;
    FitOutputs best_fit;
    std::string grid_report_path;
};

/// Fits every lambda tuple of the grid, ranks converged tuples by
/// AIC = grouped Poisson deviance + 2 ED (ties prefer the smoother tuple),
/// then produces full outputs for the winner.
GridSearchOutputs grid_search(const RunConfig& config);

struct SimulateOutputs {
    std::string counts_path;
    std::string exposures_path;
    std::string truth_path;
};

/// Writes a deterministic synthetic dataset (grouped counts, exposures,
/// latent truth) for the configured dims/grouping/seed.
SimulateOutputs run_simulate(const RunConfig& config);

/// Aggregates a fine-resolution count file to the grouping and writes the
/// grouped CSV; returns its path.
std::string run_aggregate(const RunConfig& config);

/// Benchmarks the configured engines on the ingested problem and writes
/// benchmark.json; returns the report.
BenchmarkReport run_benchmark(const RunConfig& config);

/// Grouped-scale Poisson deviance 2 sum[y ln(y/mu) - (y - mu)].
double grouped_deviance(const NdArray& y, const NdArray& mu);

} // namespace pclm::app
