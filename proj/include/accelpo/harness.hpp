#pragma once

#include "accelpo/agents.hpp"
#include "accelpo/core.hpp"
#include "accelpo/mdp.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace accelpo::harness {

/// Raised for malformed configs, sweeps and CSV inputs (maps to exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Decimal serialization: 17 significant digits, lossless for doubles.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw ConfigError("bad number: '" + s + "'");
        return v;
    } catch (const std::invalid_argument&) {
        throw ConfigError("bad number: '" + s + "'");
    }
}

inline long parse_long(const std::string& s) {
    try {
        size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw ConfigError("bad integer: '" + s + "'");
        return v;
    } catch (const std::invalid_argument&) {
        throw ConfigError("bad integer: '" + s + "'");
    }
}

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// ---------------------------------------------------------------------------
// Config files: plain `key = value` lines, '#' comments.
// ---------------------------------------------------------------------------

inline std::vector<std::pair<std::string, std::string>> parse_key_values(
    const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

inline Algorithm parse_algorithm(const std::string& v) {
    if (v == "pg") return Algorithm::pg;
    if (v == "ac") return Algorithm::ac;
    if (v == "fws") return Algorithm::fws;
    if (v == "opg_expert") return Algorithm::opg_expert;
    if (v == "opg_pred") return Algorithm::opg_pred;
    throw ConfigError("unknown algorithm '" + v + "'");
}

inline bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean: '" + v + "'");
}

/// Applies one key=value assignment to a run configuration. Shared by config
/// files, --set overrides and sweep axes. Throws ConfigError on unknown keys.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "algorithm") cfg.algorithm = parse_algorithm(value);
    else if (key == "xi") cfg.policy_step = parse_double(value);
    else if (key == "zeta") cfg.critic_step = parse_double(value);
    else if (key == "nu") cfg.meta_step = parse_double(value);
    else if (key == "alpha") cfg.target_step = parse_double(value);
    else if (key == "h") cfg.horizon = static_cast<int>(parse_long(value));
    else if (key == "n") cfg.rollout_len = static_cast<int>(parse_long(value));
    else if (key == "episodes") cfg.episodes = parse_long(value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_long(value));
    else if (key == "search_mode") {
        if (value == "eval") cfg.search_mode = SearchMode::eval;
        else if (value == "greedy") cfg.search_mode = SearchMode::greedy;
        else throw ConfigError("search_mode must be 'eval' or 'greedy', got '" + value + "'");
    } else if (key == "target_kind") {
        if (value == "parametric") cfg.target_kind = TargetKind::parametric;
        else if (value == "geometric") cfg.target_kind = TargetKind::geometric;
        else throw ConfigError("target_kind must be 'parametric' or 'geometric', got '" +
                               value + "'");
    } else if (key == "meta_optimizer") {
        if (value == "sgd") cfg.meta_optimizer = MetaOptimizer::sgd;
        else if (value == "adam") cfg.meta_optimizer = MetaOptimizer::adam;
        else throw ConfigError("meta_optimizer must be 'sgd' or 'adam', got '" + value + "'");
    } else if (key == "recompute_target") cfg.recompute_target = parse_bool(value);
    else if (key == "map") cfg.map = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

/// Parses a config file body into a run configuration plus the optional
/// `out` path. Unknown keys are rejected, all listed together.
inline std::pair<RunConfig, std::string> parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::string out_path;
    std::vector<std::string> unknown;
    for (const auto& [key, value] : parse_key_values(text)) {
        if (key == "out") {
            out_path = value;
            continue;
        }
        try {
            apply_setting(cfg, key, value);
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            if (msg.rfind("unknown config key", 0) == 0) unknown.push_back(key);
            else throw;
        }
    }
    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : unknown) msg += " '" + k + "'";
        throw ConfigError(msg);
    }
    return {cfg, out_path};
}

/// Builds the MDP a configuration runs on: a maze file when `map` is set,
/// else the builtin benchmark maze.
inline TabularMdp make_mdp(const RunConfig& cfg) {
    if (cfg.map.empty()) return load_maze(default_maze_map());
    std::ifstream in(cfg.map);
    if (!in) throw ConfigError("cannot open map file '" + cfg.map + "'");
    std::ostringstream body;
    body << in.rdbuf();
    return load_maze(body.str());
}

// ---------------------------------------------------------------------------
// Trace CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kTraceHeader = "algorithm,seed,step,episode,regret,cum_regret";

/// Writes per-step rows followed by per-episode summary rows. The episode
/// block starts at the first row whose step does not increase, which is how
/// parse_trace_csv finds the boundary.
inline void write_trace_csv(const RegretTrace& trace, std::ostream& out) {
    out << kTraceHeader << '\n';
    auto emit = [&](const RegretRecord& r) {
        out << trace.algorithm << ',' << trace.seed << ',' << r.step << ',' << r.episode << ','
            << format_double(r.regret) << ',' << format_double(r.cum_regret) << '\n';
    };
    for (const RegretRecord& r : trace.steps) emit(r);
    for (const RegretRecord& r : trace.episodes) emit(r);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else cur += c;
    }
    out.push_back(cur);
    return out;
}

inline RegretTrace parse_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("trace CSV: empty file");
    if (trim(line) != kTraceHeader)
        throw ConfigError("trace CSV: unexpected header '" + trim(line) + "'");
    RegretTrace trace;
    bool in_episode_block = false;
    long prev_step = 0;
    bool first = true;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 6) throw ConfigError("trace CSV: malformed row '" + line + "'");
        RegretRecord r;
        r.step = parse_long(f[2]);
        r.episode = parse_long(f[3]);
        r.regret = parse_double(f[4]);
        r.cum_regret = parse_double(f[5]);
        if (first) {
            trace.algorithm = f[0];
            trace.seed = static_cast<std::uint64_t>(parse_long(f[1]));
            first = false;
        }
        if (!in_episode_block && !trace.steps.empty() && r.step <= prev_step)
            in_episode_block = true;
        (in_episode_block ? trace.episodes : trace.steps).push_back(r);
        prev_step = r.step;
    }
    if (first) throw ConfigError("trace CSV: no data rows");
    trace.n_steps = static_cast<long>(trace.steps.size());
    trace.total_regret = trace.steps.empty() ? 0.0 : trace.steps.back().cum_regret;
    return trace;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepAxis {
    std::string key;
    std::vector<std::string> values;
};

struct SweepSpec {
    RunConfig base;
    std::vector<SweepAxis> axes;
    std::vector<std::uint64_t> seeds;

    void validate() const {
        if (axes.empty()) throw ConfigError("sweep: grid must have at least one axis");
        for (const auto& ax : axes)
            if (ax.values.empty())
                throw ConfigError("sweep: axis '" + ax.key + "' has no values");
        if (seeds.empty()) throw ConfigError("sweep: seed list is empty");
    }
};

struct RunSummary {
    size_t grid_index = 0;
    std::uint64_t seed = 0;
    double final_regret = 0.0;
    double total_regret = 0.0;
};

struct AggregateRecord {
    std::string config_id;
    std::vector<std::pair<std::string, std::string>> assignment;
    double final_regret_mean = 0.0;
    double final_regret_stderr = 0.0;
    double total_regret_mean = 0.0;
    double total_regret_stderr = 0.0;
    int n_seeds = 0;
};

struct SweepResult {
    std::vector<AggregateRecord> records;
    std::vector<RunSummary> runs;  // grid-major, seeds in listed order
};

/// Expands the grid in axis order, first axis outermost.
inline std::vector<std::vector<std::pair<std::string, std::string>>> expand_grid(
    const std::vector<SweepAxis>& axes) {
    std::vector<std::vector<std::pair<std::string, std::string>>> grid{{}};
    for (const SweepAxis& ax : axes) {
        std::vector<std::vector<std::pair<std::string, std::string>>> next;
        next.reserve(grid.size() * ax.values.size());
        for (const auto& partial : grid)
            for (const std::string& v : ax.values) {
                auto row = partial;
                row.emplace_back(ax.key, v);
                next.push_back(std::move(row));
            }
        grid = std::move(next);
    }
    return grid;
}

inline RunConfig grid_config(const SweepSpec& spec,
                             const std::vector<std::pair<std::string, std::string>>& assignment,
                             std::uint64_t seed) {
    RunConfig cfg = spec.base;
    for (const auto& [k, v] : assignment) apply_setting(cfg, k, v);
    cfg.seed = seed;
    cfg.validate();
    return cfg;
}

inline std::string assignment_id(
    const std::vector<std::pair<std::string, std::string>>& assignment) {
    std::string id;
    for (const auto& [k, v] : assignment) {
        if (!id.empty()) id += ';';
        id += k + "=" + v;
    }
    return id;
}

namespace detail {

inline std::pair<double, double> mean_stderr(std::vector<double> xs) {
    const size_t n = xs.size();
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(n);
    if (n < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    return {mean, sd / std::sqrt(static_cast<double>(n))};
}

}  // namespace detail

/// Runs every grid point for every seed, `jobs` runs in flight at a time.
/// Workers own disjoint result slots; aggregation happens after the join, in
/// grid order, with per-config summaries sorted by seed so that aggregates do
/// not depend on the order seeds were listed in.
inline SweepResult run_sweep(const SweepSpec& spec, int jobs = 1) {
    spec.validate();
    const auto grid = expand_grid(spec.axes);
    // Validate every grid point up front so a bad axis value fails fast.
    for (const auto& assignment : grid) grid_config(spec, assignment, spec.seeds.front());

    struct Task {
        size_t grid_index;
        size_t seed_index;
    };
    std::vector<Task> tasks;
    tasks.reserve(grid.size() * spec.seeds.size());
    for (size_t g = 0; g < grid.size(); ++g)
        for (size_t s = 0; s < spec.seeds.size(); ++s) tasks.push_back({g, s});

    SweepResult result;
    result.runs.resize(tasks.size());
    std::atomic<size_t> cursor{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        while (true) {
            const size_t i = cursor.fetch_add(1);
            if (i >= tasks.size()) return;
            try {
                const Task& t = tasks[i];
                const RunConfig cfg =
                    grid_config(spec, grid[t.grid_index], spec.seeds[t.seed_index]);
                const TabularMdp mdp = make_mdp(cfg);
                const RegretTrace trace = run_algorithm(mdp, cfg, /*keep_steps=*/false);
                result.runs[i] = {t.grid_index, cfg.seed, trace.final_regret(),
                                  trace.total_regret};
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                cursor.store(tasks.size());
                return;
            }
        }
    };

    const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    for (size_t g = 0; g < grid.size(); ++g) {
        std::vector<std::pair<std::uint64_t, std::pair<double, double>>> by_seed;
        for (const RunSummary& r : result.runs)
            if (r.grid_index == g)
                by_seed.emplace_back(r.seed, std::make_pair(r.final_regret, r.total_regret));
        std::sort(by_seed.begin(), by_seed.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<double> finals, totals;
        for (const auto& [seed, ft] : by_seed) {
            finals.push_back(ft.first);
            totals.push_back(ft.second);
        }
        AggregateRecord rec;
        rec.config_id = assignment_id(grid[g]);
        rec.assignment = grid[g];
        std::tie(rec.final_regret_mean, rec.final_regret_stderr) =
            detail::mean_stderr(std::move(finals));
        std::tie(rec.total_regret_mean, rec.total_regret_stderr) =
            detail::mean_stderr(std::move(totals));
        rec.n_seeds = static_cast<int>(by_seed.size());
        result.records.push_back(std::move(rec));
    }
    return result;
}

inline void write_aggregate_csv(const SweepResult& result, std::ostream& out) {
    if (result.records.empty()) throw ConfigError("aggregate CSV: nothing to write");
    out << "config_id";
    for (const auto& [k, v] : result.records.front().assignment) out << ',' << k;
    out << ",final_regret_mean,final_regret_stderr,total_regret_mean,total_regret_stderr,seeds\n";
    for (const AggregateRecord& rec : result.records) {
        out << rec.config_id;
        for (const auto& [k, v] : rec.assignment) out << ',' << v;
        out << ',' << format_double(rec.final_regret_mean) << ','
            << format_double(rec.final_regret_stderr) << ','
            << format_double(rec.total_regret_mean) << ','
            << format_double(rec.total_regret_stderr) << ',' << rec.n_seeds << '\n';
    }
}

// ---------------------------------------------------------------------------
// Presets: the benchmark sweeps.
// ---------------------------------------------------------------------------

inline std::vector<std::uint64_t> default_seeds() {
    return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
}

inline SweepSpec preset_sweep(const std::string& name) {
    SweepSpec spec;
    spec.seeds = default_seeds();
    if (name == "fig2a" || name == "fig2b") {
        spec.base.algorithm = Algorithm::fws;
        spec.base.policy_step = 0.5;
        spec.base.rollout_len = 2;
        spec.base.episodes = 500;
        spec.base.search_mode = name == "fig2a" ? SearchMode::eval : SearchMode::greedy;
        spec.axes = {{"zeta", {"0.01", "0.1", "0.5", "0.9"}},
                     {"h", {"0", "1", "2", "4", "8", "16"}}};
        return spec;
    }
    if (name == "fig3a") {
        spec.base.algorithm = Algorithm::opg_expert;
        spec.base.policy_step = 0.1;
        spec.base.target_step = 1.0;
        spec.base.horizon = 1;
        spec.base.rollout_len = 2;
        spec.base.episodes = 500;
        spec.base.meta_optimizer = MetaOptimizer::adam;
        spec.axes = {{"target_kind", {"parametric", "geometric"}},
                     {"nu", {"0.0003", "0.001", "0.003"}}};
        return spec;
    }
    if (name == "fig3b" || name == "fig3c") {
        spec.base.algorithm = Algorithm::opg_pred;
        spec.base.policy_step = 0.5;
        spec.base.meta_step = 0.3;
        spec.base.target_step = 1.0;
        spec.base.horizon = 1;
        spec.base.rollout_len = 2;
        spec.base.episodes = 500;
        spec.base.meta_optimizer = MetaOptimizer::adam;
        spec.axes = {{"target_kind", {"parametric", "geometric"}}, {"zeta", {"0.1", "0.5"}}};
        return spec;
    }
    throw ConfigError("unknown sweep preset '" + name + "'");
}

}  // namespace accelpo::harness
