#pragma once

// The offloading decision process: each round the MVAP observes
// (B_total, SINR, previous t_total, f_MVAP, f_ECS), picks how many of the
// B_total bits go to the edge server, and is rewarded when the resulting
// end-to-end latency meets the strictest user requirement.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvap/error.hpp"
#include "mvap/physical_model.hpp"
#include "mvap/random.hpp"
#include "mvap/sinr_chain.hpp"

namespace mvap {

struct ScenarioParams {
    int num_mvds = 3;
    int num_users = 3;
    // Per-episode packet size is drawn uniformly from this set and shared by all MVDs.
    std::vector<double> packet_bits_choices = {1920.0 * 1080.0};
    double distance_min_m = 160.0;
    double distance_max_m = 210.0;
    double t_require_min_s = 1.5;
    double t_require_max_s = 2.3;
    // When set, replaces the per-user uniform draw.
    std::optional<double> t_require_fixed_s;
    // CPU frequencies ~ N(mu, (rel_std * mu)^2), resampled below truncation * mu.
    double cpu_rel_std = 0.1;
    double cpu_truncation = 0.5;
};

struct RewardParams {
    double positive = 20.0;
    double negative = -1.0;
};

/// Fixed scales that bring the five state features to order one for the network.
struct FeatureScale {
    double b_total_bits = 1e7;
    double t_total_s = 2.3;
};

inline std::vector<double> default_sinr_states_db() { return {-5.0, -3.0, 0.0, 3.0, 5.0}; }

/// SINR transition probabilities as printed for the 5-level channel. Rows 2-4 do
/// not sum to one; see default_sinr_transition().
inline std::vector<std::vector<double>> published_sinr_transition() {
    return {{0.600, 0.250, 0.100, 0.040, 0.010},
            {0.250, 0.300, 0.250, 0.100, 0.040},
            {0.100, 0.250, 0.320, 0.250, 0.100},
            {0.040, 0.100, 0.250, 0.300, 0.250},
            {0.010, 0.040, 0.100, 0.250, 0.600}};
}

/// The published matrix with each row rescaled to sum to one.
inline std::vector<std::vector<double>> default_sinr_transition() {
    return normalize_rows(published_sinr_transition());
}

struct EnvConfig {
    MvdParams mvd;  // template shared by all MVDs; packet size and distance are drawn per episode
    ChannelParams channel;
    ComputeParams compute;
    ScenarioParams scenario;
    std::vector<double> sinr_states_db = default_sinr_states_db();
    std::vector<std::vector<double>> sinr_transition = default_sinr_transition();
    RewardParams reward;
    FeatureScale features;
    int split_factor = 1000;
    int steps_per_episode = 100;
};

inline void validate(const EnvConfig& cfg) {
    validate(cfg.mvd);
    validate(cfg.channel);
    validate(cfg.compute);
    const auto& sc = cfg.scenario;
    require(sc.num_mvds >= 1, Errc::EmptyMvdSet, "num_mvds must be >= 1");
    require(sc.num_users >= 1, Errc::EmptyUserSet, "num_users must be >= 1");
    require(!sc.packet_bits_choices.empty(), Errc::InvalidParameter, "packet_bits_choices is empty");
    for (double q : sc.packet_bits_choices)
        require(std::isfinite(q) && q > 0.0, Errc::InvalidParameter, "packet size must be > 0");
    require(sc.distance_min_m > 0.0 && sc.distance_min_m <= sc.distance_max_m, Errc::InvalidParameter,
            "distance range must satisfy 0 < min <= max");
    require(sc.t_require_min_s > 0.0 && sc.t_require_min_s <= sc.t_require_max_s, Errc::InvalidParameter,
            "t_require range must satisfy 0 < min <= max");
    if (sc.t_require_fixed_s)
        require(*sc.t_require_fixed_s > 0.0, Errc::InvalidParameter, "t_require_fixed_s must be > 0");
    require(sc.cpu_rel_std >= 0.0, Errc::InvalidParameter, "cpu_rel_std must be >= 0");
    require(sc.cpu_truncation > 0.0 && sc.cpu_truncation < 1.0, Errc::InvalidParameter,
            "cpu_truncation must be in (0,1)");
    require(cfg.reward.positive > cfg.reward.negative, Errc::InvalidParameter,
            "positive reward must exceed negative reward");
    require(cfg.features.b_total_bits > 0.0 && cfg.features.t_total_s > 0.0, Errc::InvalidParameter,
            "feature scales must be > 0");
    require(cfg.split_factor >= 1, Errc::InvalidParameter, "split_factor must be >= 1");
    require(cfg.steps_per_episode >= 1, Errc::InvalidParameter, "steps_per_episode must be >= 1");
    SinrChain probe(cfg.sinr_states_db, cfg.sinr_transition);
    (void)probe;
}

struct EnvState {
    double b_total_bits = 0.0;
    double sinr_db = 0.0;
    double t_total_prev_s = 0.0;
    double f_mvap_hz = 0.0;
    double f_ecs_hz = 0.0;
};

inline constexpr std::size_t kFeatureCount = 5;
using Features = std::array<double, kFeatureCount>;

/// Network input for a state. SINR maps linearly onto [-1, 1] over the configured range.
inline Features normalize(const EnvState& s, const EnvConfig& cfg) {
    double lo = cfg.sinr_states_db.front(), hi = lo;
    for (double v : cfg.sinr_states_db) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double sinr = hi > lo ? 2.0 * (s.sinr_db - lo) / (hi - lo) - 1.0 : 0.0;
    return {s.b_total_bits / cfg.features.b_total_bits, sinr, s.t_total_prev_s / cfg.features.t_total_s,
            s.f_mvap_hz / cfg.compute.f_mvap_hz, s.f_ecs_hz / cfg.compute.f_ecs_hz};
}

struct StepOutcome {
    EnvState next_state;
    double reward = 0.0;
    LatencyBreakdown breakdown;
    bool violated = false;
    bool terminal = false;
    std::uint64_t b_offload_bits = 0;
    std::uint64_t b_local_bits = 0;
};

// Latency recorded in the observed state when a device link has zero rate.
inline constexpr double kUnreachableLatencyS = 1e3;

class Environment {
public:
    Environment(EnvConfig cfg, std::uint64_t seed)
        : cfg_(std::move(cfg)),
          chain_(cfg_.sinr_states_db, cfg_.sinr_transition),
          channel_rng_(make_stream(seed, Stream::Channel)),
          compute_rng_(make_stream(seed, Stream::Compute)),
          sinr_rng_(make_stream(seed, Stream::Sinr)),
          scenario_rng_(make_stream(seed, Stream::Scenario)) {
        validate(cfg_);
    }

    const EnvConfig& config() const { return cfg_; }

    /// Actions 0..F inclusive; action k offloads ceil(k * B_total / F) bits.
    int action_count() const { return cfg_.split_factor + 1; }

    const EnvState& reset() {
        const auto& sc = cfg_.scenario;
        packet_bits_ = sc.packet_bits_choices[uniform_index(scenario_rng_, sc.packet_bits_choices.size())];
        mvds_.assign(static_cast<std::size_t>(sc.num_mvds), cfg_.mvd);
        for (auto& m : mvds_) {
            m.packet_bits = packet_bits_;
            m.distance_m = uniform(scenario_rng_, sc.distance_min_m, sc.distance_max_m);
        }
        if (sc.t_require_fixed_s) {
            t_require_ = *sc.t_require_fixed_s;
        } else {
            std::vector<double> users(static_cast<std::size_t>(sc.num_users));
            for (auto& t : users) t = uniform(scenario_rng_, sc.t_require_min_s, sc.t_require_max_s);
            t_require_ = requirement(users);
        }
        double b_total = 0.0;
        bits_per_mvd_.clear();
        for (const auto& m : mvds_) {
            bits_per_mvd_.push_back(sensed_bits(m));
            b_total += bits_per_mvd_.back();
        }
        // Bits are whole; a fractional sensed total is rounded up.
        b_total_bits_ = static_cast<std::uint64_t>(std::ceil(b_total));
        chain_.reset_uniform(sinr_rng_);
        draw_fading();
        state_.b_total_bits = static_cast<double>(b_total_bits_);
        state_.sinr_db = chain_.current_db();
        state_.t_total_prev_s = 0.0;
        state_.f_mvap_hz = draw_cpu(cfg_.compute.f_mvap_hz);
        state_.f_ecs_hz = draw_cpu(cfg_.compute.f_ecs_hz);
        step_index_ = 0;
        active_ = true;
        return state_;
    }

    StepOutcome step(int action) {
        require(active_, Errc::InvalidParameter, "step called before reset or after the terminal step");
        require(action >= 0 && action <= cfg_.split_factor, Errc::InvalidAction,
                "action " + std::to_string(action) + " outside [0, " + std::to_string(cfg_.split_factor) + "]");
        StepOutcome out;
        const auto f = static_cast<std::uint64_t>(cfg_.split_factor);
        out.b_offload_bits = (static_cast<std::uint64_t>(action) * b_total_bits_ + f - 1) / f;
        out.b_local_bits = b_total_bits_ - out.b_offload_bits;

        out.breakdown = evaluate(out.b_local_bits, out.b_offload_bits);
        out.violated = out.breakdown.t_total_s > t_require_;
        out.reward = out.violated ? cfg_.reward.negative : cfg_.reward.positive;

        ++step_index_;
        out.terminal = step_index_ >= cfg_.steps_per_episode;
        if (out.terminal) active_ = false;

        state_.sinr_db = chain_.step(sinr_rng_);
        state_.f_mvap_hz = draw_cpu(cfg_.compute.f_mvap_hz);
        state_.f_ecs_hz = draw_cpu(cfg_.compute.f_ecs_hz);
        state_.t_total_prev_s = std::min(out.breakdown.t_total_s, kUnreachableLatencyS);
        draw_fading();
        out.next_state = state_;
        return out;
    }

    const EnvState& state() const { return state_; }
    Features features() const { return normalize(state_, cfg_); }
    double t_require() const { return t_require_; }
    double packet_bits() const { return packet_bits_; }
    int step_index() const { return step_index_; }
    const std::vector<MvdParams>& mvds() const { return mvds_; }
    const std::vector<double>& rice_samples() const { return rice_; }

    /// Latency of an arbitrary split in the current state without advancing anything.
    LatencyBreakdown evaluate(std::uint64_t b_local, std::uint64_t b_offload) const {
        std::vector<MvdTiming> timings;
        timings.reserve(mvds_.size());
        for (std::size_t n = 0; n < mvds_.size(); ++n) {
            const double gain = channel_gain(mvds_[n], cfg_.channel, rice_[n]);
            const double rate = mvd_rate(mvds_[n], gain, cfg_.channel);
            MvdTiming t;
            t.t_sensing_s = mvds_[n].sensing_time_s;
            try {
                t.t_comm_s = comm_delay(bits_per_mvd_[n], rate);
            } catch (const Error&) {
                t.t_comm_s = std::numeric_limits<double>::infinity();
            }
            timings.push_back(t);
        }
        const double t_local = local_latency(static_cast<double>(b_local), cfg_.compute, state_.f_mvap_hz);
        const auto off = offload_latency(static_cast<double>(b_offload), state_.sinr_db, cfg_.compute,
                                         state_.f_ecs_hz);
        return total_latency(timings, t_local, off, cfg_.compute);
    }

private:
    void draw_fading() {
        rice_.resize(mvds_.size());
        for (auto& r : rice_) r = rice_power_sample(cfg_.channel.rice_k_factor, channel_rng_);
    }

    double draw_cpu(double mean) {
        const double sd = cfg_.scenario.cpu_rel_std * mean;
        const double floor = cfg_.scenario.cpu_truncation * mean;
        double f;
        do {
            f = mean + sd * standard_normal(compute_rng_);
        } while (f < floor);
        return f;
    }

    EnvConfig cfg_;
    SinrChain chain_;
    Rng channel_rng_, compute_rng_, sinr_rng_, scenario_rng_;
    std::vector<MvdParams> mvds_;
    std::vector<double> bits_per_mvd_;
    std::vector<double> rice_;
    EnvState state_;
    std::uint64_t b_total_bits_ = 0;
    double packet_bits_ = 0.0;
    double t_require_ = 0.0;
    int step_index_ = 0;
    bool active_ = false;
};

/// Checks the declared state invariants against a configuration.
inline bool state_is_valid(const EnvState& s, const EnvConfig& cfg) {
    bool sinr_ok = false;
    for (double v : cfg.sinr_states_db) sinr_ok = sinr_ok || v == s.sinr_db;
    return sinr_ok && std::isfinite(s.b_total_bits) && s.b_total_bits > 0.0 && s.f_mvap_hz > 0.0 &&
           s.f_ecs_hz > 0.0 && std::isfinite(s.t_total_prev_s) && s.t_total_prev_s >= 0.0;
}

}  // namespace mvap
