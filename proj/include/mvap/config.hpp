#pragma once

// Experiment configuration: one JSON document holding every physical constant,
// the SINR chain, reward values, agent hyper-parameters and the campaign layout.
// Every key is optional and falls back to the built-in default; unknown keys
// are rejected so typos cannot silently select a default.

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvap/agents.hpp"
#include "mvap/environment.hpp"
#include "mvap/error.hpp"

namespace mvap {

struct ExperimentConfig {
    EnvConfig env;
    AgentParams agent;
    std::vector<Algorithm> algorithms = {Algorithm::QLearning, Algorithm::Dqn, Algorithm::Ddqn, Algorithm::Random};
    int episodes = 1000;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::string output_dir = "results";
    int moving_average_window = 50;
    double convergence_fraction = 0.95;
    int plateau_window = 100;
    std::vector<double> sweep_t_require_s = {1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0, 2.1, 2.2, 2.3};
    int threads = 0;  // 0 = hardware concurrency
};

namespace config_detail {

using nlohmann::json;

[[noreturn]] inline void config_fail(const std::string& path, const std::string& what) {
    fail(Errc::ConfigError, path + ": " + what);
}

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) config_fail(path.empty() ? "<root>" : path, "expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items())
        if (!ok.count(key)) config_fail(join(path, key), "unknown key");
}

enum class Bound { Any, Positive, NonNegative, Probability };

inline void check_bound(double v, Bound b, const std::string& path) {
    switch (b) {
        case Bound::Any: break;
        case Bound::Positive:
            if (!(v > 0.0)) config_fail(path, "must be > 0");
            break;
        case Bound::NonNegative:
            if (!(v >= 0.0)) config_fail(path, "must be >= 0");
            break;
        case Bound::Probability:
            if (!(v >= 0.0 && v <= 1.0)) config_fail(path, "must lie in [0, 1]");
            break;
    }
}

inline void read(const json& obj, const std::string& path, const char* key, double& out, Bound b = Bound::Any) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    const auto p = join(path, key);
    if (!v.is_number()) config_fail(p, "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) config_fail(p, "must be finite");
    check_bound(out, b, p);
}

inline void read(const json& obj, const std::string& path, const char* key, int& out, int min_value) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    const auto p = join(path, key);
    if (!v.is_number_integer()) config_fail(p, "expected an integer");
    const auto x = v.get<long long>();
    if (x < min_value || x > 1'000'000'000LL) config_fail(p, "must be >= " + std::to_string(min_value));
    out = static_cast<int>(x);
}

inline void read(const json& obj, const std::string& path, const char* key, std::size_t& out, std::size_t min_value) {
    int tmp = static_cast<int>(out);
    read(obj, path, key, tmp, static_cast<int>(min_value));
    out = static_cast<std::size_t>(tmp);
}

inline void read(const json& obj, const std::string& path, const char* key, std::string& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_string()) config_fail(join(path, key), "expected a string");
    out = v.get<std::string>();
}

inline void read(const json& obj, const std::string& path, const char* key, std::vector<double>& out,
                 Bound b = Bound::Any) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    const auto p = join(path, key);
    if (!v.is_array() || v.empty()) config_fail(p, "expected a non-empty array of numbers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto ip = p + "[" + std::to_string(i) + "]";
        if (!v[i].is_number()) config_fail(ip, "expected a number");
        out.push_back(v[i].get<double>());
        check_bound(out.back(), b, ip);
    }
}

inline void read_optional(const json& obj, const std::string& path, const char* key, std::optional<double>& out,
                          Bound b) {
    if (!obj.contains(key)) return;
    if (obj.at(key).is_null()) {
        out.reset();
        return;
    }
    double v = 0.0;
    read(obj, path, key, v, b);
    out = v;
}

inline const json* section(const json& obj, const char* key) {
    return obj.contains(key) ? &obj.at(key) : nullptr;
}

inline void parse_system(const json& j, const std::string& path, ExperimentConfig& cfg) {
    check_keys(j, path, {"num_mvds", "num_users", "mvd", "packet_bits_choices", "distance_m", "channel", "compute",
                         "t_require"});
    auto& env = cfg.env;
    read(j, path, "num_mvds", env.scenario.num_mvds, 1);
    read(j, path, "num_users", env.scenario.num_users, 1);
    read(j, path, "packet_bits_choices", env.scenario.packet_bits_choices, Bound::Positive);
    if (const auto* m = section(j, "mvd")) {
        const auto p = join(path, "mvd");
        check_keys(*m, p, {"sensing_time_s", "sensing_rate_pps", "tx_power_w", "bandwidth_hz"});
        read(*m, p, "sensing_time_s", env.mvd.sensing_time_s, Bound::Positive);
        read(*m, p, "sensing_rate_pps", env.mvd.sensing_rate_pps, Bound::Positive);
        read(*m, p, "tx_power_w", env.mvd.tx_power_w, Bound::Positive);
        read(*m, p, "bandwidth_hz", env.mvd.bandwidth_hz, Bound::Positive);
    }
    if (const auto* d = section(j, "distance_m")) {
        const auto p = join(path, "distance_m");
        check_keys(*d, p, {"min", "max"});
        read(*d, p, "min", env.scenario.distance_min_m, Bound::Positive);
        read(*d, p, "max", env.scenario.distance_max_m, Bound::Positive);
        if (env.scenario.distance_min_m > env.scenario.distance_max_m) config_fail(join(p, "min"), "must be <= max");
    }
    if (const auto* c = section(j, "channel")) {
        const auto p = join(path, "channel");
        check_keys(*c, p, {"pathloss_ref", "pathloss_exponent", "noise_variance_w", "capacity_gap", "rice_k_factor"});
        read(*c, p, "pathloss_ref", env.channel.pathloss_ref, Bound::Positive);
        read(*c, p, "pathloss_exponent", env.channel.pathloss_exponent, Bound::Positive);
        read(*c, p, "noise_variance_w", env.channel.noise_variance_w, Bound::Positive);
        read(*c, p, "capacity_gap", env.channel.capacity_gap, Bound::Positive);
        if (env.channel.capacity_gap <= 1.0) config_fail(join(p, "capacity_gap"), "must be > 1");
        read(*c, p, "rice_k_factor", env.channel.rice_k_factor, Bound::NonNegative);
    }
    if (const auto* c = section(j, "compute")) {
        const auto p = join(path, "compute");
        check_keys(*c, p, {"f_mvap_mean_hz", "f_ecs_mean_hz", "cpu_rel_std", "cpu_truncation",
                           "complexity_cycles_per_bit", "w_mvap_hz", "delivery_time_s"});
        read(*c, p, "f_mvap_mean_hz", env.compute.f_mvap_hz, Bound::Positive);
        read(*c, p, "f_ecs_mean_hz", env.compute.f_ecs_hz, Bound::Positive);
        read(*c, p, "cpu_rel_std", env.scenario.cpu_rel_std, Bound::NonNegative);
        read(*c, p, "cpu_truncation", env.scenario.cpu_truncation, Bound::Positive);
        if (env.scenario.cpu_truncation >= 1.0) config_fail(join(p, "cpu_truncation"), "must be < 1");
        read(*c, p, "complexity_cycles_per_bit", env.compute.complexity_cycles_per_bit, Bound::Positive);
        read(*c, p, "w_mvap_hz", env.compute.w_mvap_hz, Bound::Positive);
        read(*c, p, "delivery_time_s", env.compute.delivery_time_s, Bound::Positive);
    }
    if (const auto* t = section(j, "t_require")) {
        const auto p = join(path, "t_require");
        check_keys(*t, p, {"min_s", "max_s", "fixed_s"});
        read(*t, p, "min_s", env.scenario.t_require_min_s, Bound::Positive);
        read(*t, p, "max_s", env.scenario.t_require_max_s, Bound::Positive);
        if (env.scenario.t_require_min_s > env.scenario.t_require_max_s) config_fail(join(p, "min_s"), "must be <= max_s");
        read_optional(*t, p, "fixed_s", env.scenario.t_require_fixed_s, Bound::Positive);
    }
}

inline void parse_sinr(const json& j, const std::string& path, ExperimentConfig& cfg) {
    check_keys(j, path, {"states_db", "transition", "normalize_rows"});
    read(j, path, "states_db", cfg.env.sinr_states_db);
    bool normalise = false;
    if (j.contains("normalize_rows")) {
        if (!j.at("normalize_rows").is_boolean()) config_fail(join(path, "normalize_rows"), "expected true or false");
        normalise = j.at("normalize_rows").get<bool>();
    }
    if (j.contains("transition")) {
        const auto& m = j.at("transition");
        const auto p = join(path, "transition");
        if (!m.is_array() || m.empty()) config_fail(p, "expected a non-empty array of rows");
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < m.size(); ++i) {
            const auto rp = p + "[" + std::to_string(i) + "]";
            if (!m[i].is_array()) config_fail(rp, "expected an array");
            std::vector<double> row;
            for (std::size_t k = 0; k < m[i].size(); ++k) {
                if (!m[i][k].is_number()) config_fail(rp + "[" + std::to_string(k) + "]", "expected a number");
                row.push_back(m[i][k].get<double>());
            }
            rows.push_back(std::move(row));
        }
        cfg.env.sinr_transition = std::move(rows);
    }
    try {
        if (normalise) cfg.env.sinr_transition = normalize_rows(cfg.env.sinr_transition);
        SinrChain probe(cfg.env.sinr_states_db, cfg.env.sinr_transition);
    } catch (const Error& e) {
        config_fail(join(path, "transition"), e.what());
    }
}

inline void parse_agent(const json& j, const std::string& path, ExperimentConfig& cfg) {
    check_keys(j, path, {"learning_rate", "batch_size", "discount", "replay_capacity", "target_update_period", "tau",
                         "gradient_clip_norm", "hidden_layers", "epsilon", "q_learning"});
    auto& a = cfg.agent;
    read(j, path, "learning_rate", a.learning_rate, Bound::NonNegative);
    read(j, path, "batch_size", a.batch_size, 1);
    read(j, path, "discount", a.discount, Bound::Probability);
    read(j, path, "replay_capacity", a.replay_capacity, 1);
    read(j, path, "target_update_period", a.target_update_period, 1);
    read(j, path, "tau", a.tau, Bound::Probability);
    read_optional(j, path, "gradient_clip_norm", a.gradient_clip_norm, Bound::Positive);
    if (j.contains("hidden_layers")) {
        const auto& h = j.at("hidden_layers");
        const auto p = join(path, "hidden_layers");
        if (!h.is_array()) config_fail(p, "expected an array of widths");
        a.hidden_layers.clear();
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (!h[i].is_number_integer() || h[i].get<long long>() < 1)
                config_fail(p + "[" + std::to_string(i) + "]", "expected a positive integer");
            a.hidden_layers.push_back(h[i].get<int>());
        }
    }
    if (const auto* e = section(j, "epsilon")) {
        const auto p = join(path, "epsilon");
        check_keys(*e, p, {"start", "min", "decay", "decay_fraction"});
        read(*e, p, "start", a.epsilon_start, Bound::Probability);
        read(*e, p, "min", a.epsilon_min, Bound::Probability);
        if (a.epsilon_min > a.epsilon_start) config_fail(join(p, "min"), "must be <= start");
        read_optional(*e, p, "decay", a.epsilon_decay, Bound::Positive);
        if (a.epsilon_decay && *a.epsilon_decay >= 1.0) config_fail(join(p, "decay"), "must be < 1");
        read(*e, p, "decay_fraction", a.epsilon_decay_fraction, Bound::Positive);
        if (a.epsilon_decay_fraction > 1.0) config_fail(join(p, "decay_fraction"), "must be <= 1");
    }
    if (const auto* q = section(j, "q_learning")) {
        const auto p = join(path, "q_learning");
        check_keys(*q, p, {"learning_rate", "b_total_bins", "t_total_bins", "t_total_max_s"});
        read(*q, p, "learning_rate", a.ql_learning_rate, Bound::Probability);
        read(*q, p, "b_total_bins", a.ql_b_total_bins, 1);
        read(*q, p, "t_total_bins", a.ql_t_total_bins, 1);
        read(*q, p, "t_total_max_s", a.ql_t_total_max_s, Bound::Positive);
    }
}

inline void parse_experiment(const json& j, const std::string& path, ExperimentConfig& cfg) {
    check_keys(j, path, {"algorithms", "episodes", "seeds", "output_dir", "moving_average_window",
                         "convergence_fraction", "plateau_window", "sweep_t_require_s", "threads"});
    if (j.contains("algorithms")) {
        const auto& a = j.at("algorithms");
        const auto p = join(path, "algorithms");
        if (!a.is_array() || a.empty()) config_fail(p, "expected a non-empty array");
        cfg.algorithms.clear();
        for (std::size_t i = 0; i < a.size(); ++i) {
            const auto ip = p + "[" + std::to_string(i) + "]";
            if (!a[i].is_string()) config_fail(ip, "expected one of ql, dqn, ddqn, rm");
            const auto algo = parse_algorithm(a[i].get<std::string>());
            if (!algo) config_fail(ip, "expected one of ql, dqn, ddqn, rm");
            cfg.algorithms.push_back(*algo);
        }
    }
    read(j, path, "episodes", cfg.episodes, 1);
    if (j.contains("seeds")) {
        const auto& s = j.at("seeds");
        const auto p = join(path, "seeds");
        if (!s.is_array() || s.empty()) config_fail(p, "expected a non-empty array of seeds");
        cfg.seeds.clear();
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!s[i].is_number_unsigned()) config_fail(p + "[" + std::to_string(i) + "]", "expected a non-negative integer");
            cfg.seeds.push_back(s[i].get<std::uint64_t>());
        }
    }
    read(j, path, "output_dir", cfg.output_dir);
    read(j, path, "moving_average_window", cfg.moving_average_window, 1);
    read(j, path, "convergence_fraction", cfg.convergence_fraction, Bound::Probability);
    read(j, path, "plateau_window", cfg.plateau_window, 1);
    read(j, path, "sweep_t_require_s", cfg.sweep_t_require_s, Bound::Positive);
    read(j, path, "threads", cfg.threads, 0);
}

}  // namespace config_detail

/// Final semantic check; reports the offending field path.
inline void validate(const ExperimentConfig& cfg) {
    try {
        validate(cfg.env);
    } catch (const Error& e) {
        fail(Errc::ConfigError, std::string("system: ") + e.what());
    }
    try {
        validate(cfg.agent);
    } catch (const Error& e) {
        fail(Errc::ConfigError, std::string("agent: ") + e.what());
    }
    require(cfg.episodes >= 1, Errc::ConfigError, "experiment.episodes: must be >= 1");
    require(!cfg.seeds.empty(), Errc::ConfigError, "experiment.seeds: at least one seed is required");
    require(!cfg.algorithms.empty(), Errc::ConfigError, "experiment.algorithms: at least one algorithm is required");
    require(!cfg.output_dir.empty(), Errc::ConfigError, "experiment.output_dir: must not be empty");
}

inline ExperimentConfig parse_config(const nlohmann::json& root) {
    using namespace config_detail;
    ExperimentConfig cfg;
    check_keys(root, "", {"system", "sinr", "reward", "mdp", "agent", "experiment"});
    if (const auto* s = section(root, "system")) parse_system(*s, "system", cfg);
    if (const auto* s = section(root, "sinr")) parse_sinr(*s, "sinr", cfg);
    if (const auto* r = section(root, "reward")) {
        check_keys(*r, "reward", {"positive", "negative"});
        read(*r, "reward", "positive", cfg.env.reward.positive);
        read(*r, "reward", "negative", cfg.env.reward.negative);
        if (cfg.env.reward.positive <= cfg.env.reward.negative)
            config_fail("reward.positive", "must exceed reward.negative");
    }
    if (const auto* m = section(root, "mdp")) {
        check_keys(*m, "mdp", {"split_factor", "steps_per_episode", "feature_scale"});
        read(*m, "mdp", "split_factor", cfg.env.split_factor, 1);
        read(*m, "mdp", "steps_per_episode", cfg.env.steps_per_episode, 1);
        if (const auto* f = section(*m, "feature_scale")) {
            check_keys(*f, "mdp.feature_scale", {"b_total_bits", "t_total_s"});
            read(*f, "mdp.feature_scale", "b_total_bits", cfg.env.features.b_total_bits, Bound::Positive);
            read(*f, "mdp.feature_scale", "t_total_s", cfg.env.features.t_total_s, Bound::Positive);
        }
    }
    if (const auto* a = section(root, "agent")) parse_agent(*a, "agent", cfg);
    if (const auto* e = section(root, "experiment")) parse_experiment(*e, "experiment", cfg);
    validate(cfg);
    return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        fail(Errc::ConfigError, std::string("<root>: invalid JSON: ") + e.what());
    }
    return parse_config(root);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), Errc::IoError, "cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace mvap
