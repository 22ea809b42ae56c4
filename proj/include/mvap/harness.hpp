#pragma once

// Experiment orchestration: trains each (algorithm, seed[, t_require]) cell,
// aggregates per-episode rewards across seeds, detects convergence and writes
// CSV, summary and SVG artefacts.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mvap/agents.hpp"
#include "mvap/config.hpp"
#include "mvap/environment.hpp"
#include "mvap/error.hpp"
#include "mvap/svg_chart.hpp"

namespace mvap {

struct RunCell {
    Algorithm algorithm = Algorithm::Random;
    std::uint64_t seed = 0;
    std::optional<double> t_require_s;  // overrides the per-user draw when set
};

struct RunResult {
    RunCell cell;
    std::vector<EpisodeRecord> records;
};

struct AlgorithmCurve {
    Algorithm algorithm = Algorithm::Random;
    std::vector<double> mean_reward;     // per-step reward per episode, averaged over seeds
    std::vector<double> moving_average;  // trailing window over mean_reward
    int convergence_episode = 0;         // 1-based
    double plateau = 0.0;
    double final_average = 0.0;
};

struct CampaignSummary {
    int episodes = 0;
    int moving_average_window = 0;
    double convergence_fraction = 0.0;
    int plateau_window = 0;
    int steps_per_episode = 0;
    std::vector<AlgorithmCurve> curves;

    const AlgorithmCurve* find(Algorithm a) const {
        for (const auto& c : curves)
            if (c.algorithm == a) return &c;
        return nullptr;
    }
};

struct Campaign {
    std::vector<RunResult> runs;
    CampaignSummary summary;
};

struct SweepTable {
    std::vector<Algorithm> algorithms;
    std::vector<double> t_values;
    std::vector<std::vector<double>> final_reward;  // [t index][algorithm index], mean over seeds
    std::vector<RunResult> runs;
};

/// Trains one agent for `cfg.episodes` episodes. Environment and agent share the
/// master seed; their random streams are disjoint.
inline std::vector<EpisodeRecord> train_run(const ExperimentConfig& cfg, const RunCell& cell) {
    EnvConfig env_cfg = cfg.env;
    if (cell.t_require_s) env_cfg.scenario.t_require_fixed_s = cell.t_require_s;
    Environment env(env_cfg, cell.seed);
    auto agent = make_agent(cell.algorithm, env_cfg, cfg.agent, cell.seed);
    auto schedule = ExplorationSchedule::for_run(cfg.agent, cfg.episodes);
    std::vector<EpisodeRecord> records;
    records.reserve(static_cast<std::size_t>(cfg.episodes));
    for (int e = 1; e <= cfg.episodes; ++e) records.push_back(train_episode(*agent, env, schedule, e));
    return records;
}

/// Runs independent cells on a worker pool; results keep the order of `cells`.
inline std::vector<RunResult> run_cells(const ExperimentConfig& cfg, const std::vector<RunCell>& cells) {
    std::vector<RunResult> results(cells.size());
    std::vector<std::exception_ptr> errors(cells.size());
    unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::thread::hardware_concurrency();
    workers = std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(std::max<std::size_t>(1, cells.size())));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                results[i] = RunResult{cells[i], train_run(cfg, cells[i])};
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

/// Trailing mean; the first window-1 entries average what is available.
inline std::vector<double> moving_average(std::span<const double> values, int window) {
    require(window >= 1, Errc::InvalidParameter, "moving-average window must be >= 1");
    std::vector<double> out(values.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        sum += values[i];
        if (i >= static_cast<std::size_t>(window)) sum -= values[i - static_cast<std::size_t>(window)];
        out[i] = sum / static_cast<double>(std::min<std::size_t>(i + 1, static_cast<std::size_t>(window)));
    }
    return out;
}

/// First 1-based episode whose moving average reaches `fraction` of the plateau
/// (fraction of the distance to zero for a negative plateau). Returns the last
/// episode if the threshold is never met.
inline int convergence_episode(std::span<const double> moving_avg, double plateau, double fraction) {
    const double threshold = plateau >= 0.0 ? fraction * plateau : plateau / fraction;
    for (std::size_t i = 0; i < moving_avg.size(); ++i)
        if (moving_avg[i] >= threshold) return static_cast<int>(i + 1);
    return static_cast<int>(moving_avg.size());
}

inline double tail_mean(std::span<const double> values, int window) {
    require(!values.empty(), Errc::InvalidParameter, "no values to average");
    const std::size_t n = std::min<std::size_t>(values.size(), static_cast<std::size_t>(std::max(1, window)));
    double sum = 0.0;
    for (std::size_t i = values.size() - n; i < values.size(); ++i) sum += values[i];
    return sum / static_cast<double>(n);
}

inline CampaignSummary summarize(std::span<const RunResult> runs, const ExperimentConfig& cfg) {
    CampaignSummary s;
    s.episodes = cfg.episodes;
    s.moving_average_window = cfg.moving_average_window;
    s.convergence_fraction = cfg.convergence_fraction;
    s.plateau_window = cfg.plateau_window;
    s.steps_per_episode = cfg.env.steps_per_episode;
    for (Algorithm algo : cfg.algorithms) {
        AlgorithmCurve c;
        c.algorithm = algo;
        int n = 0;
        for (const auto& r : runs) {
            if (r.cell.algorithm != algo) continue;
            if (c.mean_reward.empty()) c.mean_reward.assign(r.records.size(), 0.0);
            require(r.records.size() == c.mean_reward.size(), Errc::ShapeMismatch, "runs differ in episode count");
            for (std::size_t e = 0; e < r.records.size(); ++e) c.mean_reward[e] += r.records[e].reward_mean;
            ++n;
        }
        if (n == 0) continue;
        for (double& v : c.mean_reward) v /= n;
        c.moving_average = moving_average(c.mean_reward, cfg.moving_average_window);
        c.final_average = tail_mean(c.mean_reward, cfg.plateau_window);
        c.plateau = c.final_average;
        c.convergence_episode = convergence_episode(c.moving_average, c.plateau, cfg.convergence_fraction);
        s.curves.push_back(std::move(c));
    }
    return s;
}

/// RFC 4180 field: quoted when it holds a comma, quote or line break.
inline std::string csv_field(const std::string& v) {
    if (v.find_first_of(",\"\r\n") == std::string::npos) return v;
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string episodes_csv(std::span<const EpisodeRecord> records) {
    std::string out = "episode,reward_total,reward_mean,violations,mean_t_total,epsilon\r\n";
    for (const auto& r : records) {
        out += csv_field(std::to_string(r.episode)) + "," + csv_field(csv_number(r.reward_total)) + "," +
               csv_field(csv_number(r.reward_mean)) + "," + csv_field(std::to_string(r.violations)) + "," +
               csv_field(csv_number(r.mean_t_total)) + "," + csv_field(csv_number(r.epsilon)) + "\r\n";
    }
    return out;
}

inline std::string run_file_name(const RunCell& cell) {
    std::string name;
    if (cell.t_require_s) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "treq%.3f_", *cell.t_require_s);
        name += buf;
    }
    return name + std::string(to_string(cell.algorithm)) + "_seed" + std::to_string(cell.seed) + ".csv";
}

inline std::string summary_text(const CampaignSummary& s) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "episodes: %d\nmoving_average_window: %d\nconvergence_fraction: %.4f\nplateau_window: %d\n\n",
                  s.episodes, s.moving_average_window, s.convergence_fraction, s.plateau_window);
    out += buf;
    out += "algorithm  convergence_episode  plateau_per_step  final_average_per_step  final_average_per_episode\n";
    for (const auto& c : s.curves) {
        const double per_episode = c.final_average * s.steps_per_episode;
        std::snprintf(buf, sizeof buf, "%-9s  %19d  %16.4f  %22.4f  %25.4f\n", std::string(to_string(c.algorithm)).c_str(),
                      c.convergence_episode, c.plateau, c.final_average, per_episode);
        out += buf;
    }
    return out;
}

namespace harness_detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), Errc::IoError, "cannot open " + path.string() + " for writing");
    out << text;
    out.flush();
    require(static_cast<bool>(out), Errc::IoError, "write failed for " + path.string());
}

inline void make_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec && std::filesystem::is_directory(dir), Errc::IoError, "cannot create directory " + dir.string());
}

inline std::string algorithm_label(Algorithm a) {
    switch (a) {
        case Algorithm::QLearning: return "QL";
        case Algorithm::Dqn: return "DQN";
        case Algorithm::Ddqn: return "DDQN";
        case Algorithm::Random: return "RM";
    }
    return "?";
}

}  // namespace harness_detail

/// Writes one CSV per run, the aggregated curves, summary.txt and convergence.svg.
inline void emit_outputs(std::span<const RunResult> runs, const CampaignSummary& summary, const std::string& out_dir) {
    using namespace harness_detail;
    require(!runs.empty(), Errc::InvalidParameter, "no runs to write");
    for (const auto& r : runs) require(!r.records.empty(), Errc::InvalidParameter, "run without episode records");
    require(!summary.curves.empty(), Errc::InvalidParameter, "summary has no curves");

    const std::filesystem::path dir(out_dir);
    make_dir(dir);
    for (const auto& r : runs) write_file(dir / run_file_name(r.cell), episodes_csv(r.records));

    std::string curves = "episode";
    for (const auto& c : summary.curves) {
        const std::string a(to_string(c.algorithm));
        curves += "," + a + "_reward_mean," + a + "_moving_average";
    }
    curves += "\r\n";
    const std::size_t n = summary.curves.front().mean_reward.size();
    for (std::size_t e = 0; e < n; ++e) {
        curves += std::to_string(e + 1);
        for (const auto& c : summary.curves) curves += "," + csv_number(c.mean_reward[e]) + "," + csv_number(c.moving_average[e]);
        curves += "\r\n";
    }
    write_file(dir / "curves.csv", curves);
    write_file(dir / "summary.txt", summary_text(summary));

    ChartSpec chart;
    chart.title = "Average reward per step (" + std::to_string(summary.moving_average_window) + "-episode moving average)";
    chart.x_label = "Episode";
    chart.y_label = "Average reward";
    for (const auto& c : summary.curves) {
        ChartSeries s{algorithm_label(c.algorithm), {}, c.moving_average};
        for (std::size_t e = 0; e < c.moving_average.size(); ++e) s.x.push_back(static_cast<double>(e + 1));
        chart.series.push_back(std::move(s));
    }
    write_file(dir / "convergence.svg", render_line_chart(chart));
}

inline Campaign run_campaign(const ExperimentConfig& cfg, bool write_outputs = true) {
    validate(cfg);
    std::vector<RunCell> cells;
    for (Algorithm a : cfg.algorithms)
        for (auto seed : cfg.seeds) cells.push_back({a, seed, std::nullopt});
    Campaign c;
    c.runs = run_cells(cfg, cells);
    c.summary = summarize(c.runs, cfg);
    if (write_outputs) emit_outputs(c.runs, c.summary, cfg.output_dir);
    return c;
}

inline std::string sweep_csv(const SweepTable& t) {
    std::string out = "t_require";
    for (auto a : t.algorithms) out += "," + std::string(to_string(a));
    out += "\r\n";
    for (std::size_t i = 0; i < t.t_values.size(); ++i) {
        out += csv_number(t.t_values[i]);
        for (double v : t.final_reward[i]) out += "," + csv_number(v);
        out += "\r\n";
    }
    return out;
}

inline void emit_sweep(const SweepTable& table, const std::string& out_dir) {
    using namespace harness_detail;
    require(!table.t_values.empty() && !table.runs.empty(), Errc::InvalidParameter, "empty sweep");
    const std::filesystem::path dir(out_dir);
    make_dir(dir / "sweep");
    for (const auto& r : table.runs) write_file(dir / "sweep" / run_file_name(r.cell), episodes_csv(r.records));
    write_file(dir / "sweep.csv", sweep_csv(table));
    ChartSpec chart;
    chart.title = "Final average reward vs. latency requirement";
    chart.x_label = "t_require (s)";
    chart.y_label = "Average reward";
    chart.markers = true;
    for (std::size_t a = 0; a < table.algorithms.size(); ++a) {
        ChartSeries s{algorithm_label(table.algorithms[a]), table.t_values, {}};
        for (const auto& row : table.final_reward) s.y.push_back(row[a]);
        chart.series.push_back(std::move(s));
    }
    write_file(dir / "requirement_sweep.svg", render_line_chart(chart));
}

/// Trains every (algorithm, seed) at each fixed requirement and tabulates the
/// final average per-step reward (mean over seeds).
inline SweepTable sweep_requirement(const ExperimentConfig& cfg, std::span<const double> t_values,
                                    bool write_outputs = true) {
    validate(cfg);
    require(!t_values.empty(), Errc::ConfigError, "sweep needs at least one t_require value");
    for (double t : t_values) require(t > 0.0, Errc::ConfigError, "sweep t_require values must be > 0");
    SweepTable table;
    table.algorithms = cfg.algorithms;
    table.t_values.assign(t_values.begin(), t_values.end());
    std::vector<RunCell> cells;
    for (double t : t_values)
        for (Algorithm a : cfg.algorithms)
            for (auto seed : cfg.seeds) cells.push_back({a, seed, t});
    table.runs = run_cells(cfg, cells);
    table.final_reward.assign(t_values.size(), std::vector<double>(cfg.algorithms.size(), 0.0));
    std::size_t k = 0;
    for (std::size_t i = 0; i < t_values.size(); ++i)
        for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
            double sum = 0.0;
            for (std::size_t s = 0; s < cfg.seeds.size(); ++s, ++k) {
                std::vector<double> per_step;
                for (const auto& r : table.runs[k].records) per_step.push_back(r.reward_mean);
                sum += tail_mean(per_step, cfg.plateau_window);
            }
            table.final_reward[i][a] = sum / static_cast<double>(cfg.seeds.size());
        }
    if (write_outputs) emit_sweep(table, cfg.output_dir);
    return table;
}

}  // namespace mvap
