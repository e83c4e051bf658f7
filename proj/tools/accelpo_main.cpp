// accelpo: experiment harness for accelerated policy optimization on mazes.
//
// Subcommands:
//   solve  — load a maze, solve it exactly, print the optimum
//   run    — run one algorithm, write a per-step/per-episode trace CSV
//   sweep  — run a preset or custom grid across seeds, write aggregate CSV
//   check  — run the randomized invariant suite
//   plot   — render trace/aggregate CSVs as an SVG line chart
//
// Exit codes: 0 success, 1 property/acceptance failure, 2 usage or I/O error.

#include "accelpo/accelpo.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace accelpo;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw harness::ConfigError("cannot open '" + path + "'");
    std::ostringstream body;
    body << in.rdbuf();
    return body.str();
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw harness::ConfigError("cannot write '" + path + "'");
    out << body;
}

std::uint64_t env_fallback_seed(std::uint64_t otherwise) {
    const char* env = std::getenv("ACCELPO_SEED");
    if (env == nullptr || *env == '\0') return otherwise;
    return static_cast<std::uint64_t>(harness::parse_long(env));
}

struct SetOverrides {
    std::vector<std::string> entries;

    void apply(RunConfig& cfg) const {
        for (const std::string& e : entries) {
            const size_t eq = e.find('=');
            if (eq == std::string::npos)
                throw harness::ConfigError("--set expects key=value, got '" + e + "'");
            harness::apply_setting(cfg, harness::trim(e.substr(0, eq)),
                                   harness::trim(e.substr(eq + 1)));
        }
    }
};

int cmd_solve(const std::string& map_path) {
    const TabularMdp mdp = load_maze(read_file(map_path));
    const ValueIterationResult vi = value_iteration(mdp, 1e-10);
    std::cout << "states: " << mdp.n_states() << "\n";
    std::cout << "optimal performance: " << harness::format_double(vi.j_star) << "\n";
    std::cout << "optimal path length: " << greedy_path_length(mdp, vi.pi_star) << "\n";
    return 0;
}

int cmd_run(const std::string& config_path, const SetOverrides& overrides, long seed_flag,
            bool seed_set, const std::string& out_flag) {
    auto [cfg, out_path] = harness::parse_run_config(read_file(config_path));
    overrides.apply(cfg);
    if (seed_set) cfg.seed = static_cast<std::uint64_t>(seed_flag);
    else cfg.seed = env_fallback_seed(cfg.seed);
    if (!out_flag.empty()) out_path = out_flag;
    if (out_path.empty()) out_path = "trace.csv";
    cfg.validate();

    const TabularMdp mdp = harness::make_mdp(cfg);
    const RegretTrace trace = run_algorithm(mdp, cfg);
    std::ostringstream csv;
    harness::write_trace_csv(trace, csv);
    write_file(out_path, csv.str());
    std::cout << "wrote " << out_path << " (" << trace.n_steps << " steps, "
              << trace.episodes.size() << " episodes, total regret "
              << harness::format_double(trace.total_regret) << ")\n";
    return 0;
}

int cmd_sweep(const std::string& preset, const std::string& sweep_path,
              const SetOverrides& overrides, const std::string& out_flag, int jobs) {
    harness::SweepSpec spec;
    if (!preset.empty()) {
        spec = harness::preset_sweep(preset);
    } else if (!sweep_path.empty()) {
        // Sweep file: base config keys plus `axis.<key> = v1 v2 ...` lines and
        // an optional `seeds = s1 s2 ...` line.
        for (const auto& [key, value] : harness::parse_key_values(read_file(sweep_path))) {
            if (key.rfind("axis.", 0) == 0) {
                harness::SweepAxis ax;
                ax.key = key.substr(5);
                std::istringstream vals(value);
                std::string v;
                while (vals >> v) ax.values.push_back(v);
                spec.axes.push_back(std::move(ax));
            } else if (key == "seeds") {
                std::istringstream vals(value);
                std::string v;
                while (vals >> v)
                    spec.seeds.push_back(static_cast<std::uint64_t>(harness::parse_long(v)));
            } else if (key == "out") {
                continue;
            } else {
                harness::apply_setting(spec.base, key, value);
            }
        }
        if (spec.seeds.empty()) spec.seeds = harness::default_seeds();
    } else {
        throw harness::ConfigError("sweep: pass --preset <name> or --config <sweep file>");
    }
    overrides.apply(spec.base);

    const harness::SweepResult result = harness::run_sweep(spec, jobs);
    const std::string out_path = out_flag.empty() ? "aggregate.csv" : out_flag;
    std::ostringstream csv;
    harness::write_aggregate_csv(result, csv);
    write_file(out_path, csv.str());
    std::cout << "wrote " << out_path << " (" << result.records.size() << " configs x "
              << spec.seeds.size() << " seeds)\n";
    return 0;
}

int cmd_check(long seed_flag, bool seed_set) {
    const std::uint64_t audit_seed =
        seed_set ? static_cast<std::uint64_t>(seed_flag) : env_fallback_seed(20240901);
    const auto results = harness::run_invariant_checks(audit_seed);
    size_t width = 0;
    for (const auto& r : results) width = std::max(width, r.name.size());
    bool all_pass = true;
    for (const auto& r : results) {
        all_pass = all_pass && r.pass;
        std::cout << (r.pass ? "PASS  " : "FAIL  ") << r.name
                  << std::string(width - r.name.size() + 2, ' ') << r.detail << "\n";
    }
    std::cout << (all_pass ? "all checks passed" : "CHECKS FAILED") << " (audit seed "
              << audit_seed << ")\n";
    return all_pass ? 0 : 1;
}

int cmd_plot(const std::vector<std::string>& csv_paths, const std::string& out_flag) {
    const harness::PlotData data = harness::load_plot_data(csv_paths);
    const std::string out_path = out_flag.empty() ? "plot.svg" : out_flag;
    write_file(out_path, harness::render_svg(data));
    std::cout << "wrote " << out_path << " (" << data.series.size() << " series)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"accelerated policy optimization experiment harness"};
    app.require_subcommand(1);

    std::string map_path, config_path, out_path, preset;
    std::vector<std::string> csv_paths;
    SetOverrides overrides;
    long seed_flag = 0;
    int jobs = 1;

    auto* solve = app.add_subcommand("solve", "solve a maze exactly");
    solve->add_option("map", map_path, "ASCII map file")->required();

    auto* run = app.add_subcommand("run", "run one algorithm and write a trace CSV");
    run->add_option("--config", config_path, "config file")->required();
    auto* run_seed = run->add_option("--seed", seed_flag, "seed override");
    run->add_option("--out", out_path, "output CSV path");
    run->add_option("--set", overrides.entries, "key=value config overrides");

    auto* sweep = app.add_subcommand("sweep", "run a sweep and write an aggregate CSV");
    sweep->add_option("--preset", preset, "preset name: fig2a fig2b fig3a fig3b fig3c");
    sweep->add_option("--config", config_path, "sweep file");
    sweep->add_option("--out", out_path, "output CSV path");
    sweep->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
    sweep->add_option("--set", overrides.entries, "key=value base-config overrides");

    auto* check = app.add_subcommand("check", "run the invariant suite");
    auto* check_seed = check->add_option("--seed", seed_flag, "audit seed");

    auto* plot = app.add_subcommand("plot", "render CSVs as an SVG chart");
    plot->add_option("csv", csv_paths, "input CSV files")->required();
    plot->add_option("--out", out_path, "output SVG path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (solve->parsed()) return cmd_solve(map_path);
        if (run->parsed())
            return cmd_run(config_path, overrides, seed_flag, run_seed->count() > 0, out_path);
        if (sweep->parsed()) return cmd_sweep(preset, config_path, overrides, out_path, jobs);
        if (check->parsed()) return cmd_check(seed_flag, check_seed->count() > 0);
        if (plot->parsed()) return cmd_plot(csv_paths, out_path);
    } catch (const harness::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
