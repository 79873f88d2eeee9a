#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "pclm/app.hpp"
#include "pclm/errors.hpp"
#include "pclm/io.hpp"
#include "pclm/simulate.hpp"
#include "pclm/solver.hpp"

using namespace pclm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("pclm_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string str(const std::string& sub = "") const { return (sub.empty() ? path : path / sub).string(); }
};

void write_file(const std::string& path, const std::string& content) { io::write_text(path, content); }

std::string slurp(const std::string& path) { return io::read_text(path); }

/// Sweden-shaped grouping: ages 10..104 in 19 five-year groups, periods
/// 0..59 in 12 five-year groups.
void write_sweden_grouping(const std::string& path) {
    std::string ages, years;
    for (int g = 0; g < 19; ++g) ages += (g ? "," : "") + std::to_string(10 + 5 * g);
    for (int g = 0; g < 12; ++g) years += (g ? "," : "") + std::to_string(5 * g);
    write_file(path, ages + "\n" + years + "\n");
}

} // namespace

TEST_CASE("simulate writes byte-identical files for the same seed") {
    TempDir dir;
    write_sweden_grouping(dir.str("grouping.txt"));
    app::RunConfig cfg;
    cfg.grouping_path = dir.str("grouping.txt");
    cfg.dims = {95, 60};
    cfg.seed = 11;

    cfg.out_dir = dir.str("a");
    app::SimulateOutputs a = app::run_simulate(cfg);
    cfg.out_dir = dir.str("b");
    app::SimulateOutputs b = app::run_simulate(cfg);
    CHECK(slurp(a.counts_path) == slurp(b.counts_path));
    CHECK(slurp(a.exposures_path) == slurp(b.exposures_path));
    CHECK(slurp(a.truth_path) == slurp(b.truth_path));

    cfg.seed = 12;
    cfg.out_dir = dir.str("c");
    app::SimulateOutputs c = app::run_simulate(cfg);
    CHECK(slurp(a.counts_path) != slurp(c.counts_path));
}

TEST_CASE("simulated grouped counts preserve the fine totals") {
    SyntheticScenario sc = make_scenario({20, 12}, {10.0, 0.0});
    std::vector<CompositionMatrix> comps{build_composition({{0, 5, 10, 15}}, 20),
                                         build_composition({{0, 6}}, 12)};
    SimulatedData data = simulate(sc, comps, 5);
    CHECK(data.grouped_counts.sum() == doctest::Approx(data.fine_counts.sum()).epsilon(1e-12));
    for (std::size_t g = 0; g < data.grouped_counts.size(); ++g)
        CHECK(data.grouped_counts[g] == std::round(data.grouped_counts[g]));
}

TEST_CASE("sampled counts match the latent means over many replicates") {
    // High-exposure ages keep the relative Monte Carlo error of a 200-draw
    // mean far below the 1% gate.
    SyntheticScenario sc = make_scenario({10, 8}, {75.0, 0.0});
    std::vector<CompositionMatrix> comps{build_composition({{0, 5}}, 10), build_composition({{0, 4}}, 8)};
    NdArray expect = sc.eta_true();
    NdArray e = sc.exposures();
    for (std::size_t i = 0; i < expect.size(); ++i) expect[i] = e[i] * std::exp(expect[i]);
    NdArray expect_grouped = aggregate(expect, comps);

    NdArray mean(expect_grouped.dims());
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
        SimulatedData data = simulate(sc, comps, 1000 + static_cast<std::uint64_t>(r));
        for (std::size_t g = 0; g < mean.size(); ++g) mean[g] += data.grouped_counts[g] / reps;
    }
    for (std::size_t g = 0; g < mean.size(); ++g)
        CHECK(std::abs(mean[g] - expect_grouped[g]) / expect_grouped[g] < 0.01);
}

TEST_CASE("ingest assembles the Sweden-shaped problem") {
    TempDir dir;
    write_sweden_grouping(dir.str("grouping.txt"));
    app::RunConfig cfg;
    cfg.grouping_path = dir.str("grouping.txt");
    cfg.dims = {95, 60};
    cfg.seed = 3;
    cfg.out_dir = dir.str();
    app::SimulateOutputs sim = app::run_simulate(cfg);

    cfg.counts_path = sim.counts_path;
    cfg.exposures_path = sim.exposures_path;
    cfg.basis_sizes = {19, 12};
    cfg.lambdas = {10.0, 1000.0};
    app::ProblemBundle bundle = app::ingest(cfg);
    CHECK(bundle.problem.group_extents() == std::vector<std::size_t>{19, 12});
    CHECK(bundle.problem.fine_extents() == std::vector<std::size_t>{95, 60});
    CHECK(bundle.problem.coef_extents() == std::vector<std::size_t>{19, 12});
    CHECK(bundle.fine_coords[0].front() == 10.0);
    CHECK(bundle.fine_coords[0].back() == 104.0);
    CHECK(bundle.problem.exposures.has_value());
}

TEST_CASE("ingest rejects unknown group labels and incomplete exposure grids") {
    TempDir dir;
    write_file(dir.str("grouping.txt"), "0,2\n");
    write_file(dir.str("counts.csv"), "g1,count\n0,5\n3,7\n"); // 3 is not a group bound
    write_file(dir.str("exposures.csv"), "x1,exposure\n0,1\n1,1\n2,1\n3,1\n");
    app::RunConfig cfg;
    cfg.grouping_path = dir.str("grouping.txt");
    cfg.counts_path = dir.str("counts.csv");
    cfg.exposures_path = dir.str("exposures.csv");
    cfg.basis_sizes = {3};
    cfg.degree = 2;
    cfg.lambdas = {1.0};
    CHECK_THROWS_AS(app::ingest(cfg), IoError);

    // two-dimensional exposure grid with a missing combination
    write_file(dir.str("grouping3.txt"), "0,2\n0\n");
    write_file(dir.str("counts3.csv"), "g1,g2,count\n0,0,5\n2,0,7\n");
    write_file(dir.str("exp3.csv"), "x1,x2,exposure\n0,0,1\n1,0,1\n2,0,1\n3,1,1\n");
    app::RunConfig cfg3;
    cfg3.grouping_path = dir.str("grouping3.txt");
    cfg3.counts_path = dir.str("counts3.csv");
    cfg3.exposures_path = dir.str("exp3.csv");
    cfg3.basis_sizes = {3, 1};
    cfg3.degree = 0;
    cfg3.lambdas = {1.0, 1.0};
    CHECK_THROWS_AS(app::ingest(cfg3), IoError);

    // a complete two-dimensional grid with one combination repeated
    write_file(dir.str("grouping2.txt"), "0,2\n0\n");
    write_file(dir.str("counts2.csv"), "g1,g2,count\n0,0,5\n2,0,7\n");
    write_file(dir.str("exp2.csv"), "x1,x2,exposure\n0,0,1\n1,0,1\n2,0,1\n3,0,1\n3,0,1\n");
    app::RunConfig cfg2;
    cfg2.grouping_path = dir.str("grouping2.txt");
    cfg2.counts_path = dir.str("counts2.csv");
    cfg2.exposures_path = dir.str("exp2.csv");
    cfg2.basis_sizes = {3, 1};
    cfg2.degree = 0;
    cfg2.lambdas = {1.0, 1.0};
    CHECK_THROWS_AS(app::ingest(cfg2), IoError);
}

TEST_CASE("ingest without exposures builds a unit-spaced grid from fine-count") {
    TempDir dir;
    write_file(dir.str("grouping.txt"), "0,4,8\n");
    std::string counts = "g1,count\n0,20\n4,28\n8,12\n";
    write_file(dir.str("counts.csv"), counts);
    app::RunConfig cfg;
    cfg.grouping_path = dir.str("grouping.txt");
    cfg.counts_path = dir.str("counts.csv");
    cfg.basis_sizes = {6};
    cfg.lambdas = {5.0};
    cfg.fine_count = {12};
    app::ProblemBundle bundle = app::ingest(cfg);
    CHECK_FALSE(bundle.problem.exposures.has_value());
    CHECK(bundle.problem.fine_extents() == std::vector<std::size_t>{12});
    CHECK(bundle.fine_coords[0].back() == 11.0);

    cfg.fine_count.clear();
    CHECK_THROWS_AS(app::ingest(cfg), ValidationError);
}

TEST_CASE("run_fit writes one estimate row per fine cell plus a coherent report") {
    TempDir dir;
    write_file(dir.str("grouping.txt"), "0,5,10,15\n0,4\n");
    app::RunConfig cfg;
    cfg.grouping_path = dir.str("grouping.txt");
    cfg.dims = {20, 8};
    cfg.seed = 9;
    cfg.out_dir = dir.str("sim");
    app::SimulateOutputs sim = app::run_simulate(cfg);

    cfg.counts_path = sim.counts_path;
    cfg.exposures_path = sim.exposures_path;
    cfg.basis_sizes = {7, 5};
    cfg.lambdas = {10.0, 10.0};
    cfg.out_dir = dir.str("fit");
    app::FitOutputs out = app::run_fit(cfg);
    CHECK(out.fit.converged);

    io::Table est = io::read_csv(out.estimates_path);
    CHECK(est.rows.size() == 20 * 8);
    CHECK(est.header == std::vector<std::string>{"x1", "x2", "eta_hat", "se_eta", "gamma_hat", "rate", "ci_lower",
                                                 "ci_upper"});
    for (const auto& row : est.rows) {
        const double se = row[3], rate = row[5], lo = row[6], hi = row[7];
        if (se > 0.0) {
            CHECK(lo <= rate * (1 + 1e-9));
            CHECK(rate <= hi * (1 + 1e-9));
        }
    }
    const std::string report = slurp(out.report_path);
    CHECK(report.find("\"converged\": true") != std::string::npos);
    CHECK(report.find("effective_dimension") != std::string::npos);

    const double ed = out.fit.effective_dimension;
    CHECK(ed > 0.0);
    CHECK(ed <= 35.0); // coefficient count
}

TEST_CASE("run_fit with identity grouping reproduces a plain spline smooth") {
    TempDir dir;
    std::string bounds;
    for (int i = 0; i < 15; ++i) bounds += (i ? "," : "") + std::to_string(i);
    write_file(dir.str("grouping.txt"), bounds + "\n");
    app::RunConfig cfg;
    cfg.grouping_path = dir.str("grouping.txt");
    cfg.dims = {15};
    cfg.seed = 21;
    cfg.out_dir = dir.str("sim");
    app::SimulateOutputs sim = app::run_simulate(cfg);

    cfg.counts_path = sim.counts_path;
    cfg.exposures_path = sim.exposures_path;
    cfg.basis_sizes = {8};
    cfg.lambdas = {5.0};
    cfg.out_dir = dir.str("glam");
    app::FitOutputs glam = app::run_fit(cfg);

    cfg.engine = "naive";
    cfg.out_dir = dir.str("naive");
    app::FitOutputs naive = app::run_fit(cfg);

    REQUIRE(glam.fit.converged);
    REQUIRE(naive.fit.converged);
    double d = 0.0;
    for (std::size_t i = 0; i < glam.fit.eta_hat.size(); ++i)
        d = std::max(d, std::abs(glam.fit.eta_hat[i] - naive.fit.eta_hat[i]));
    CHECK(d < 1e-6);
}

TEST_CASE("grid_search ranks by AIC and prefers smoother ties") {
    TempDir dir;
    write_file(dir.str("grouping.txt"), "0,4,8,12\n");
    app::RunConfig cfg;
    cfg.grouping_path = dir.str("grouping.txt");
    cfg.dims = {16};
    cfg.seed = 31;
    cfg.out_dir = dir.str("sim");
    app::SimulateOutputs sim = app::run_simulate(cfg);

    cfg.counts_path = sim.counts_path;
    cfg.exposures_path = sim.exposures_path;
    cfg.basis_sizes = {7};
    cfg.lambda_grid = {{0.1, 10.0, 1000.0, 100000.0}};
    cfg.out_dir = dir.str("grid");
    app::GridSearchOutputs out = app::grid_search(cfg);
    REQUIRE(out.points.size() == 4);

    double best_aic = std::numeric_limits<double>::infinity();
    for (const auto& p : out.points)
        if (p.converged) best_aic = std::min(best_aic, p.aic);
    CHECK(out.best.aic == best_aic);

    // effective dimension decreases as lambda grows
    for (std::size_t i = 1; i < out.points.size(); ++i)
        if (out.points[i].converged && out.points[i - 1].converged)
            CHECK(out.points[i].ed <= out.points[i - 1].ed + 1e-9);

    CHECK(fs::exists(out.grid_report_path));
    CHECK(fs::exists(out.best_fit.estimates_path));
}

TEST_CASE("a saturated basis with vanishing penalty drives the deviance to zero") {
    TempDir dir;
    std::string bounds;
    for (int i = 0; i < 8; ++i) bounds += (i ? "," : "") + std::to_string(i);
    write_file(dir.str("grouping.txt"), bounds + "\n");
    app::RunConfig cfg;
    cfg.grouping_path = dir.str("grouping.txt");
    cfg.dims = {8};
    cfg.seed = 41;
    cfg.out_dir = dir.str("sim");
    app::SimulateOutputs sim = app::run_simulate(cfg);

    cfg.counts_path = sim.counts_path;
    cfg.exposures_path = sim.exposures_path;
    cfg.basis_sizes = {8}; // one spline per observation
    cfg.lambdas = {1e-8};
    cfg.solver.tol_alpha = 1e-10;
    cfg.solver.max_iter = 2000;
    cfg.out_dir = dir.str("fit");
    app::FitOutputs out = app::run_fit(cfg);
    REQUIRE(out.fit.converged);
    NdArray mu = compute_mu(out.fit.gamma_hat, app::ingest(cfg).problem.comps);
    CHECK(app::grouped_deviance(app::ingest(cfg).problem.y, mu) < 1e-4);
}

TEST_CASE("aggregate command reduces a fine file and keeps totals") {
    TempDir dir;
    write_file(dir.str("grouping.txt"), "0,5\n");
    std::string fine = "x1,count\n";
    double total = 0.0;
    for (int i = 0; i < 10; ++i) {
        fine += std::to_string(i) + "," + std::to_string(3 + i) + "\n";
        total += 3 + i;
    }
    write_file(dir.str("fine.csv"), fine);
    app::RunConfig cfg;
    cfg.grouping_path = dir.str("grouping.txt");
    cfg.fine_path = dir.str("fine.csv");
    cfg.out_dir = dir.str();
    std::string path = app::run_aggregate(cfg);
    io::Table grouped = io::read_csv(path);
    REQUIRE(grouped.rows.size() == 2);
    CHECK(grouped.rows[0].back() + grouped.rows[1].back() == doctest::Approx(total));
    CHECK(grouped.rows[0].back() == doctest::Approx(3 + 4 + 5 + 6 + 7));
}

TEST_CASE("run_benchmark writes the engine comparison report") {
    TempDir dir;
    write_file(dir.str("grouping.txt"), "0,3,6,9\n");
    app::RunConfig cfg;
    cfg.grouping_path = dir.str("grouping.txt");
    cfg.dims = {12};
    cfg.seed = 51;
    cfg.out_dir = dir.str("sim");
    app::SimulateOutputs sim = app::run_simulate(cfg);

    cfg.counts_path = sim.counts_path;
    cfg.exposures_path = sim.exposures_path;
    cfg.basis_sizes = {6};
    cfg.lambdas = {10.0};
    cfg.solver.tol_alpha = 1e-9;
    cfg.solver.tol_loglik = 0.0;
    cfg.solver.max_iter = 5000;
    cfg.out_dir = dir.str("bench");
    BenchmarkReport report = app::run_benchmark(cfg);
    REQUIRE(report.engines.size() == 2);
    CHECK(report.alpha_discrepancy < 1e-6);
    CHECK(fs::exists(dir.path / "bench" / "benchmark.json"));
    const std::string json = slurp((dir.path / "bench" / "benchmark.json").string());
    CHECK(json.find("peak_elements") != std::string::npos);
}

TEST_CASE("the command-line binary maps failures to documented exit codes") {
    const char* bin = std::getenv("PCLM_BIN");
    if (!bin) return; // only meaningful under ctest

    TempDir dir;
    write_file(dir.str("grouping.txt"), "0,4,8\n");
    app::RunConfig cfg;
    cfg.grouping_path = dir.str("grouping.txt");
    cfg.dims = {12};
    cfg.seed = 61;
    cfg.out_dir = dir.str("sim");
    app::SimulateOutputs sim = app::run_simulate(cfg);

    auto run = [&](const std::string& args) {
        const std::string cmd = std::string(bin) + " " + args + " >/dev/null 2>&1";
        int status = std::system(cmd.c_str());
        return WEXITSTATUS(status);
    };
    const std::string tail = " --exposures " + sim.exposures_path + " --grouping " + dir.str("grouping.txt") +
                             " --basis 6 --lambda 10 --out-dir " + dir.str("out");
    const std::string common = "--counts " + sim.counts_path + tail;

    CHECK(run("fit " + common) == 0);
    CHECK(run("fit --counts /nonexistent.csv" + tail) == 2);
    CHECK(run("fit " + common + " --max-iter 1 --tol-alpha 1e-14 --max-polish 0") == 3);
    CHECK(run("fit " + common + " --engine naive --element-budget 10") == 4);

    // config file drives a run; explicit flags take precedence over it
    const std::string conf = dir.str("run.conf");
    write_file(conf, "counts = " + sim.counts_path + "\nexposures = " + sim.exposures_path + "\ngrouping = " +
                         dir.str("grouping.txt") + "\nbasis = 6\nlambda = 10\nout-dir = " + dir.str("from_conf") +
                         "\n");
    CHECK(run("fit --config " + conf) == 0);
    CHECK(fs::exists(dir.path / "from_conf" / "report.json"));
    CHECK(run("fit --config " + conf + " --out-dir " + dir.str("override")) == 0);
    CHECK(fs::exists(dir.path / "override" / "report.json"));
}
