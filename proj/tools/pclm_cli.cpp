#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pclm/app.hpp"
#include "pclm/errors.hpp"
#include "pclm/io.hpp"

namespace {

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw pclm::ValidationError("cannot parse '" + tok + "' in " + what);
        }
    }
    if (out.empty()) throw pclm::ValidationError(what + " is empty");
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s, const std::string& what) {
    std::vector<std::size_t> out;
    for (double v : parse_double_list(s, what)) {
        if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v)))
            throw pclm::ValidationError(what + " entries must be positive integers");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::vector<std::vector<double>> parse_grid(const std::string& s) {
    std::vector<std::vector<double>> out;
    std::stringstream ss(s);
    std::string axis;
    while (std::getline(ss, axis, ';')) out.push_back(parse_double_list(axis, "lambda-grid axis"));
    if (out.empty()) throw pclm::ValidationError("lambda-grid is empty");
    return out;
}

/// All options are carried as strings so a config file and the command line
/// share one code path; flags win over file values.
struct Options {
    std::map<std::string, std::string> values;
    std::map<std::string, std::vector<CLI::Option*>> flags; // one per subcommand that offers the key
    std::string config_path;

    void add(CLI::App* cmd, const std::string& name, const std::string& help) {
        flags[name].push_back(cmd->add_option("--" + name, values[name], help));
    }

    bool given_on_command_line(const std::string& name) const {
        auto it = flags.find(name);
        if (it == flags.end()) return false;
        for (const CLI::Option* o : it->second)
            if (o->count() > 0) return true;
        return false;
    }

    bool has(const std::string& name) const {
        auto it = values.find(name);
        return it != values.end() && !it->second.empty();
    }
    const std::string& get(const std::string& name) const { return values.at(name); }

    /// Flat key = value lines; '#' starts a comment. Values never override a
    /// flag given on the command line.
    void apply_config() {
        if (config_path.empty()) return;
        std::istringstream in(pclm::io::read_text(config_path));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            const auto strip = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                const auto e = s.find_last_not_of(" \t\r");
                return s.substr(b, e - b + 1);
            };
            const std::string t = strip(line);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw pclm::IoError(config_path + ":" + std::to_string(line_no) + ": expected key = value");
            const std::string key = strip(t.substr(0, eq));
            const std::string value = strip(t.substr(eq + 1));
            if (flags.find(key) == flags.end())
                throw pclm::IoError(config_path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
            if (!given_on_command_line(key)) values[key] = value;
        }
    }
};

void add_common_flags(CLI::App* cmd, Options& opt) {
    opt.add(cmd, "counts", "grouped counts CSV");
    opt.add(cmd, "exposures", "fine-grid exposures CSV");
    opt.add(cmd, "grouping", "grouping file (one line per dimension)");
    opt.add(cmd, "out-dir", "output directory");
    opt.add(cmd, "basis", "B-splines per dimension, e.g. 19,12");
    opt.add(cmd, "degree", "spline degree (default 3)");
    opt.add(cmd, "porder", "difference-penalty order (default 2)");
    opt.add(cmd, "lambda", "smoothing parameters, e.g. 10,1000");
    opt.add(cmd, "level", "confidence level (default 0.95)");
    opt.add(cmd, "engine", "glam or naive");
    opt.add(cmd, "seed", "random seed");
    opt.add(cmd, "fine-count", "fine cells per dimension when no exposures are given");
    opt.add(cmd, "tol-alpha", "convergence threshold on max |delta alpha|");
    opt.add(cmd, "tol-loglik", "relative log-likelihood change threshold (0 disables)");
    opt.add(cmd, "max-iter", "iteration cap");
    opt.add(cmd, "max-halvings", "step-halving cap");
    opt.add(cmd, "max-polish", "cap on trailing expected-information steps");
    opt.add(cmd, "gamma-floor", "lower clamp for gamma");
    opt.add(cmd, "element-budget", "element cap for explicit matrices");
    cmd->add_option("--config", opt.config_path, "flat key = value config file; flags win");
}

pclm::app::RunConfig build_config(const Options& opt) {
    pclm::app::RunConfig cfg;
    if (opt.has("counts")) cfg.counts_path = opt.get("counts");
    if (opt.has("exposures")) cfg.exposures_path = opt.get("exposures");
    if (opt.has("grouping")) cfg.grouping_path = opt.get("grouping");
    if (opt.has("out-dir")) cfg.out_dir = opt.get("out-dir");
    if (opt.has("basis")) cfg.basis_sizes = parse_size_list(opt.get("basis"), "basis");
    if (opt.has("degree")) cfg.degree = std::stoi(opt.get("degree"));
    if (opt.has("porder")) cfg.porder = std::stoi(opt.get("porder"));
    if (opt.has("lambda")) cfg.lambdas = parse_double_list(opt.get("lambda"), "lambda");
    if (opt.has("lambda-grid")) cfg.lambda_grid = parse_grid(opt.get("lambda-grid"));
    if (opt.has("level")) cfg.level = std::stod(opt.get("level"));
    if (opt.has("engine")) cfg.engine = opt.get("engine");
    if (opt.has("seed")) cfg.seed = std::stoull(opt.get("seed"));
    if (opt.has("dims")) cfg.dims = parse_size_list(opt.get("dims"), "dims");
    if (opt.has("fine-count")) cfg.fine_count = parse_size_list(opt.get("fine-count"), "fine-count");
    if (opt.has("fine")) cfg.fine_path = opt.get("fine");
    if (opt.has("tol-alpha")) cfg.solver.tol_alpha = std::stod(opt.get("tol-alpha"));
    if (opt.has("tol-loglik")) cfg.solver.tol_loglik = std::stod(opt.get("tol-loglik"));
    if (opt.has("max-iter")) cfg.solver.max_iter = std::stoull(opt.get("max-iter"));
    if (opt.has("max-halvings")) cfg.solver.max_step_halvings = std::stoi(opt.get("max-halvings"));
    if (opt.has("max-polish")) cfg.solver.max_polish = std::stoull(opt.get("max-polish"));
    if (opt.has("gamma-floor")) cfg.solver.gamma_floor = std::stod(opt.get("gamma-floor"));
    if (opt.has("element-budget")) cfg.solver.element_budget = std::stoull(opt.get("element-budget"));
    if (opt.has("engines")) {
        cfg.engines.clear();
        std::stringstream ss(opt.get("engines"));
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.engines.push_back(tok);
    }
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent-count estimation from grouped observations (penalized composite link model)"};
    app.require_subcommand(1);

    Options opt;

    CLI::App* fit_cmd = app.add_subcommand("fit", "estimate the latent distribution and its uncertainty");
    add_common_flags(fit_cmd, opt);

    CLI::App* sim_cmd = app.add_subcommand("simulate", "write a deterministic synthetic dataset");
    add_common_flags(sim_cmd, opt);
    opt.add(sim_cmd, "dims", "fine extents, e.g. 95,60");

    CLI::App* agg_cmd = app.add_subcommand("aggregate", "aggregate a fine count file to the grouping");
    add_common_flags(agg_cmd, opt);
    opt.add(agg_cmd, "fine", "fine-resolution counts CSV");

    CLI::App* bench_cmd = app.add_subcommand("benchmark", "time the array and explicit-matrix engines");
    add_common_flags(bench_cmd, opt);
    opt.add(bench_cmd, "engines", "engines to run, e.g. glam,naive");

    CLI::App* grid_cmd = app.add_subcommand("grid-search", "rank lambda tuples by AIC and fit the best");
    add_common_flags(grid_cmd, opt);
    opt.add(grid_cmd, "lambda-grid", "per-dimension lists, e.g. 1,10,100;10,1000");

    CLI11_PARSE(app, argc, argv);

    try {
        opt.apply_config();
        pclm::app::RunConfig cfg = build_config(opt);
        if (fit_cmd->parsed()) {
            pclm::app::FitOutputs out = pclm::app::run_fit(cfg);
            std::cout << "estimates: " << out.estimates_path << "\nreport: " << out.report_path << "\n";
            if (!out.fit.converged) {
                std::cerr << "warning: fit did not converge (" << out.fit.stop_reason << " after "
                          << out.fit.iterations << " iterations); estimates written anyway\n";
                return 3;
            }
        } else if (sim_cmd->parsed()) {
            pclm::app::SimulateOutputs out = pclm::app::run_simulate(cfg);
            std::cout << "counts: " << out.counts_path << "\nexposures: " << out.exposures_path
                      << "\ntruth: " << out.truth_path << "\n";
        } else if (agg_cmd->parsed()) {
            std::cout << "grouped: " << pclm::app::run_aggregate(cfg) << "\n";
        } else if (bench_cmd->parsed()) {
            pclm::BenchmarkReport report = pclm::app::run_benchmark(cfg);
            for (const auto& er : report.engines)
                std::cout << er.engine << ": " << er.status << ", fit " << er.fit_seconds << " s, variance "
                          << er.variance_seconds << " s, peak " << er.peak_elements << " elements\n";
        } else if (grid_cmd->parsed()) {
            pclm::app::GridSearchOutputs out = pclm::app::grid_search(cfg);
            std::cout << "best lambda:";
            for (double l : out.best.lambdas) std::cout << " " << l;
            std::cout << " (aic " << out.best.aic << ", ed " << out.best.ed << ")\n"
                      << "grid report: " << out.grid_report_path << "\n"
                      << "estimates: " << out.best_fit.estimates_path << "\n";
        }
    } catch (const pclm::ResourceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const pclm::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const pclm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
