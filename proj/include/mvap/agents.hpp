#pragma once

// Offloading policies: tabular Q-learning, DQN, Double DQN and a uniform random
// baseline, with epsilon-greedy exploration and experience replay.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mvap/environment.hpp"
#include "mvap/error.hpp"
#include "mvap/neural_net.hpp"
#include "mvap/random.hpp"
#include "mvap/replay_memory.hpp"

namespace mvap {

enum class Algorithm { QLearning, Dqn, Ddqn, Random };

inline std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::QLearning: return "ql";
        case Algorithm::Dqn: return "dqn";
        case Algorithm::Ddqn: return "ddqn";
        case Algorithm::Random: return "rm";
    }
    return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
    if (s == "ql") return Algorithm::QLearning;
    if (s == "dqn") return Algorithm::Dqn;
    if (s == "ddqn") return Algorithm::Ddqn;
    if (s == "rm") return Algorithm::Random;
    return std::nullopt;
}

struct AgentParams {
    double learning_rate = 0.001;
    int batch_size = 10;
    double discount = 0.9985;
    std::size_t replay_capacity = 10000;
    int target_update_period = 10;
    double tau = 0.001;
    // Global L2 bound on each minibatch gradient; unset disables clipping.
    std::optional<double> gradient_clip_norm = 100.0;
    std::vector<int> hidden_layers = {256, 256, 256};

    double epsilon_start = 1.0;
    double epsilon_min = 0.001;
    // Per-episode multiplier. When unset it is chosen so that epsilon reaches
    // epsilon_min after epsilon_decay_fraction of the episodes.
    std::optional<double> epsilon_decay;
    double epsilon_decay_fraction = 0.8;

    double ql_learning_rate = 0.1;
    int ql_b_total_bins = 8;
    int ql_t_total_bins = 6;
    double ql_t_total_max_s = 3.0;
};

inline void validate(const AgentParams& p) {
    require(p.learning_rate >= 0.0, Errc::InvalidParameter, "learning_rate must be >= 0");
    require(p.batch_size >= 1, Errc::InvalidParameter, "batch_size must be >= 1");
    require(p.discount >= 0.0 && p.discount <= 1.0, Errc::InvalidParameter, "discount must be in [0,1]");
    require(p.replay_capacity >= 1, Errc::InvalidParameter, "replay_capacity must be >= 1");
    require(p.target_update_period >= 1, Errc::InvalidParameter, "target_update_period must be >= 1");
    require(p.tau >= 0.0 && p.tau <= 1.0, Errc::InvalidParameter, "tau must be in [0,1]");
    if (p.gradient_clip_norm)
        require(*p.gradient_clip_norm > 0.0, Errc::InvalidParameter, "gradient_clip_norm must be > 0");
    for (int h : p.hidden_layers) require(h >= 1, Errc::InvalidParameter, "hidden layer width must be >= 1");
    require(p.epsilon_min >= 0.0 && p.epsilon_min <= p.epsilon_start && p.epsilon_start <= 1.0,
            Errc::InvalidParameter, "need 0 <= epsilon_min <= epsilon_start <= 1");
    if (p.epsilon_decay)
        require(*p.epsilon_decay > 0.0 && *p.epsilon_decay < 1.0, Errc::InvalidParameter,
                "epsilon_decay must be in (0,1)");
    require(p.epsilon_decay_fraction > 0.0 && p.epsilon_decay_fraction <= 1.0, Errc::InvalidParameter,
            "epsilon_decay_fraction must be in (0,1]");
    require(p.ql_learning_rate >= 0.0 && p.ql_learning_rate <= 1.0, Errc::InvalidParameter,
            "ql_learning_rate must be in [0,1]");
    require(p.ql_b_total_bins >= 1 && p.ql_t_total_bins >= 1 && p.ql_t_total_max_s > 0.0,
            Errc::InvalidParameter, "Q-table bin settings must be positive");
}

class ExplorationSchedule {
public:
    ExplorationSchedule(double epsilon, double decay, double epsilon_min)
        : epsilon_(epsilon), decay_(decay), min_(epsilon_min) {
        require(epsilon_min >= 0.0 && epsilon_min <= epsilon && epsilon <= 1.0, Errc::InvalidParameter,
                "need 0 <= epsilon_min <= epsilon <= 1");
        require(decay > 0.0 && decay < 1.0, Errc::InvalidParameter, "decay must be in (0,1)");
    }

    /// Decay that takes epsilon from start to min in fraction * episodes multiplications.
    static ExplorationSchedule for_run(const AgentParams& p, int episodes) {
        double decay = 0.0;
        if (p.epsilon_decay) {
            decay = *p.epsilon_decay;
        } else {
            const double steps = std::max(1.0, p.epsilon_decay_fraction * episodes);
            const double ratio = p.epsilon_min > 0.0 ? p.epsilon_min / p.epsilon_start : 1e-3;
            decay = std::pow(ratio, 1.0 / steps);
            decay = std::clamp(decay, 1e-12, 1.0 - 1e-12);
        }
        return ExplorationSchedule(p.epsilon_start, decay, p.epsilon_min);
    }

    double epsilon() const { return epsilon_; }
    double decay() const { return decay_; }
    double epsilon_min() const { return min_; }

    void advance() { epsilon_ = std::max(min_, epsilon_ * decay_); }

private:
    double epsilon_;
    double decay_;
    double min_;
};

/// Index of the largest value; ties resolve to the lowest index.
inline int argmax(std::span<const double> values) {
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

inline int argmax(const nn::Vector& v) { return argmax(std::span<const double>(v.data(), static_cast<std::size_t>(v.size()))); }

/// Epsilon-greedy choice. `q_values` is only invoked when exploiting.
template <class QFn>
int select_action(int action_count, double epsilon, Rng& rng, QFn&& q_values) {
    if (epsilon > 0.0 && uniform01(rng) < epsilon)
        return static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(action_count)));
    return argmax(q_values());
}

inline std::span<const double> as_span(const Features& f) { return {f.data(), f.size()}; }

/// r if terminal, else r + gamma * max_a' Q_target(s', a').
inline double dqn_target(double reward, const Features& next_state, const nn::QNetwork& target_net, double gamma,
                         bool terminal) {
    if (terminal) return reward;
    return reward + gamma * target_net.forward(as_span(next_state)).maxCoeff();
}

/// r if terminal, else r + gamma * Q_target(s', argmax_a Q_primary(s', a)).
inline double ddqn_target(double reward, const Features& next_state, const nn::QNetwork& primary_net,
                          const nn::QNetwork& target_net, double gamma, bool terminal) {
    if (terminal) return reward;
    const int a_star = argmax(primary_net.forward(as_span(next_state)));
    return reward + gamma * target_net.forward(as_span(next_state))(a_star);
}

/// Batched targets for a sampled minibatch, equal element-wise to the scalar forms above.
inline nn::Vector bootstrap_targets(std::span<const Transition* const> batch, Algorithm algo,
                                    const nn::QNetwork& primary, const nn::QNetwork& target, double gamma) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    nn::Matrix next(static_cast<Eigen::Index>(kFeatureCount), n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (std::size_t r = 0; r < kFeatureCount; ++r)
            next(static_cast<Eigen::Index>(r), i) = batch[static_cast<std::size_t>(i)]->next_state[r];
    const nn::Matrix q_target = target.forward_batch(next);
    nn::Matrix q_primary;
    if (algo == Algorithm::Ddqn) q_primary = primary.forward_batch(next);
    nn::Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& t = *batch[static_cast<std::size_t>(i)];
        if (t.terminal) {
            y(i) = t.reward;
            continue;
        }
        double bootstrap;
        if (algo == Algorithm::Ddqn) {
            const nn::Vector col = q_primary.col(i);
            bootstrap = q_target(argmax(col), i);
        } else {
            bootstrap = q_target.col(i).maxCoeff();
        }
        y(i) = t.reward + gamma * bootstrap;
    }
    return y;
}

class Agent {
public:
    virtual ~Agent() = default;
    virtual Algorithm algorithm() const = 0;
    virtual int act(const Features& state, double epsilon) = 0;
    /// Learn from one interaction.
    virtual void observe(const Transition& t) = 0;
};

class RandomAgent final : public Agent {
public:
    RandomAgent(int action_count, std::uint64_t seed)
        : action_count_(action_count), rng_(make_stream(seed, Stream::Exploration)) {}

    Algorithm algorithm() const override { return Algorithm::Random; }
    int act(const Features&, double) override {
        return static_cast<int>(uniform_index(rng_, static_cast<std::uint64_t>(action_count_)));
    }
    void observe(const Transition&) override {}

private:
    int action_count_;
    Rng rng_;
};

class DeepQAgent final : public Agent {
public:
    DeepQAgent(Algorithm algo, int action_count, const AgentParams& params, std::uint64_t seed)
        : algo_(algo),
          params_(params),
          memory_(params.replay_capacity),
          explore_rng_(make_stream(seed, Stream::Exploration)),
          batch_rng_(make_stream(seed, Stream::Minibatch)) {
        require(algo == Algorithm::Dqn || algo == Algorithm::Ddqn, Errc::InvalidParameter,
                "DeepQAgent runs DQN or DDQN only");
        validate(params);
        std::vector<int> sizes{static_cast<int>(kFeatureCount)};
        sizes.insert(sizes.end(), params.hidden_layers.begin(), params.hidden_layers.end());
        sizes.push_back(action_count);
        auto init_rng = make_stream(seed, Stream::Init);
        primary_ = nn::QNetwork::glorot(sizes, init_rng);
        target_ = primary_;
    }

    Algorithm algorithm() const override { return algo_; }

    int act(const Features& state, double epsilon) override {
        return select_action(primary_.output_size(), epsilon, explore_rng_,
                             [&] { return primary_.forward(as_span(state)); });
    }

    void observe(const Transition& t) override {
        memory_.push(t);
        ++steps_;
        if (memory_.size() >= static_cast<std::size_t>(params_.batch_size)) train_step();
        if (steps_ % static_cast<std::uint64_t>(params_.target_update_period) == 0)
            nn::soft_update(target_, primary_, params_.tau);
    }

    const nn::QNetwork& primary() const { return primary_; }
    const nn::QNetwork& target() const { return target_; }
    nn::QNetwork& primary() { return primary_; }
    nn::QNetwork& target() { return target_; }
    const ReplayMemory& memory() const { return memory_; }
    std::uint64_t gradient_steps() const { return gradient_steps_; }

private:
    void train_step() {
        const auto batch = memory_.sample(static_cast<std::size_t>(params_.batch_size), batch_rng_);
        nn::Minibatch mb;
        const auto n = static_cast<Eigen::Index>(batch.size());
        mb.states.resize(static_cast<Eigen::Index>(kFeatureCount), n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& t = *batch[static_cast<std::size_t>(i)];
            for (std::size_t r = 0; r < kFeatureCount; ++r) mb.states(static_cast<Eigen::Index>(r), i) = t.state[r];
            mb.actions.push_back(t.action);
        }
        mb.targets = bootstrap_targets(batch, algo_, primary_, target_, params_.discount);
        auto grads = nn::backward(primary_, mb);
        if (params_.gradient_clip_norm) nn::clip_by_norm(grads, *params_.gradient_clip_norm);
        nn::sgd_update(primary_, grads, params_.learning_rate);
        ++gradient_steps_;
    }

    Algorithm algo_;
    AgentParams params_;
    nn::QNetwork primary_, target_;
    ReplayMemory memory_;
    Rng explore_rng_, batch_rng_;
    std::uint64_t steps_ = 0;
    std::uint64_t gradient_steps_ = 0;
};

/// Discretisation of the normalised feature vector into a single table key.
class StateBinning {
public:
    StateBinning(const EnvConfig& env, const AgentParams& p)
        : b_bins_(p.ql_b_total_bins), t_bins_(p.ql_t_total_bins),
          t_max_(p.ql_t_total_max_s / env.features.t_total_s),
          cpu_sd_(env.scenario.cpu_rel_std) {
        double q_lo = env.scenario.packet_bits_choices.front(), q_hi = q_lo;
        for (double q : env.scenario.packet_bits_choices) {
            q_lo = std::min(q_lo, q);
            q_hi = std::max(q_hi, q);
        }
        const double per_packet = env.mvd.sensing_time_s * env.mvd.sensing_rate_pps * env.scenario.num_mvds;
        b_lo_ = q_lo * per_packet / env.features.b_total_bits;
        b_hi_ = q_hi * per_packet / env.features.b_total_bits;
        for (double s : env.sinr_states_db) {
            EnvState probe;
            probe.sinr_db = s;
            sinr_levels_.push_back(normalize(probe, env)[1]);
        }
    }

    std::size_t key_count() const {
        return static_cast<std::size_t>(b_bins_) * sinr_levels_.size() * static_cast<std::size_t>(t_bins_) * 9;
    }

    std::size_t key(const Features& f) const {
        std::size_t k = uniform_bin(f[0], b_lo_, b_hi_, b_bins_);
        k = k * sinr_levels_.size() + nearest_level(f[1]);
        k = k * static_cast<std::size_t>(t_bins_) + uniform_bin(f[2], 0.0, t_max_, t_bins_);
        k = k * 3 + cpu_bin(f[3]);
        k = k * 3 + cpu_bin(f[4]);
        return k;
    }

private:
    static std::size_t uniform_bin(double v, double lo, double hi, int bins) {
        if (bins <= 1 || hi <= lo) return 0;
        const double pos = (v - lo) / (hi - lo) * bins;
        return static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(bins - 1)));
    }

    std::size_t nearest_level(double v) const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < sinr_levels_.size(); ++i)
            if (std::abs(v - sinr_levels_[i]) < std::abs(v - sinr_levels_[best])) best = i;
        return best;
    }

    // Normalised frequency is f / mu; edges at 1 -+ relative std.
    std::size_t cpu_bin(double v) const {
        if (v < 1.0 - cpu_sd_) return 0;
        if (v > 1.0 + cpu_sd_) return 2;
        return 1;
    }

    int b_bins_, t_bins_;
    double t_max_, cpu_sd_;
    double b_lo_ = 0.0, b_hi_ = 0.0;
    std::vector<double> sinr_levels_;
};

/// Sparse Q-table; rows for unseen keys read as zeros.
class QTable {
public:
    explicit QTable(int action_count) : action_count_(action_count), zeros_(static_cast<std::size_t>(action_count), 0.0) {}

    int action_count() const { return action_count_; }
    std::size_t size() const { return rows_.size(); }

    std::span<const double> row(std::size_t key) const {
        const auto it = rows_.find(key);
        return it == rows_.end() ? std::span<const double>(zeros_) : std::span<const double>(it->second);
    }

    double value(std::size_t key, int action) const { return row(key)[static_cast<std::size_t>(action)]; }

    std::vector<double>& mutable_row(std::size_t key) {
        auto [it, inserted] = rows_.try_emplace(key);
        if (inserted) it->second.assign(static_cast<std::size_t>(action_count_), 0.0);
        return it->second;
    }

private:
    int action_count_;
    std::vector<double> zeros_;
    std::unordered_map<std::size_t, std::vector<double>> rows_;
};

/// Q(s,a) <- Q(s,a) + alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)); terminal steps drop the bootstrap.
inline void qtable_update(QTable& table, std::size_t s, int a, double r, std::size_t s_next, double alpha,
                          double gamma, bool terminal = false) {
    require(a >= 0 && a < table.action_count(), Errc::InvalidAction, "Q-table action out of range");
    double bootstrap = 0.0;
    if (!terminal) {
        const auto next = table.row(s_next);
        bootstrap = *std::max_element(next.begin(), next.end());
    }
    auto& row = table.mutable_row(s);
    auto& q = row[static_cast<std::size_t>(a)];
    q += alpha * (r + gamma * bootstrap - q);
}

class TabularQAgent final : public Agent {
public:
    TabularQAgent(const EnvConfig& env, int action_count, const AgentParams& params, std::uint64_t seed)
        : params_(params), binning_(env, params), table_(action_count), rng_(make_stream(seed, Stream::Exploration)) {
        validate(params);
    }

    Algorithm algorithm() const override { return Algorithm::QLearning; }

    int act(const Features& state, double epsilon) override {
        return select_action(table_.action_count(), epsilon, rng_, [&] { return table_.row(binning_.key(state)); });
    }

    void observe(const Transition& t) override {
        qtable_update(table_, binning_.key(t.state), t.action, t.reward, binning_.key(t.next_state),
                      params_.ql_learning_rate, params_.discount, t.terminal);
    }

    const QTable& table() const { return table_; }
    const StateBinning& binning() const { return binning_; }

private:
    AgentParams params_;
    StateBinning binning_;
    QTable table_;
    Rng rng_;
};

inline std::unique_ptr<Agent> make_agent(Algorithm algo, const EnvConfig& env, const AgentParams& params,
                                         std::uint64_t seed) {
    const int actions = env.split_factor + 1;
    switch (algo) {
        case Algorithm::QLearning: return std::make_unique<TabularQAgent>(env, actions, params, seed);
        case Algorithm::Dqn:
        case Algorithm::Ddqn: return std::make_unique<DeepQAgent>(algo, actions, params, seed);
        case Algorithm::Random: return std::make_unique<RandomAgent>(actions, seed);
    }
    fail(Errc::InvalidParameter, "unknown algorithm");
}

struct EpisodeRecord {
    int episode = 0;
    double reward_total = 0.0;
    double reward_mean = 0.0;
    int violations = 0;
    double mean_t_total = 0.0;
    double epsilon = 0.0;
};

/// One full episode: act, learn from every transition, then decay epsilon.
/// `epsilon` in the record is the value in effect during the episode.
inline EpisodeRecord train_episode(Agent& agent, Environment& env, ExplorationSchedule& schedule, int episode) {
    EpisodeRecord rec;
    rec.episode = episode;
    rec.epsilon = agent.algorithm() == Algorithm::Random ? 1.0 : schedule.epsilon();
    env.reset();
    Features s = env.features();
    int steps = 0;
    double t_sum = 0.0;
    for (;;) {
        const int a = agent.act(s, schedule.epsilon());
        const StepOutcome out = env.step(a);
        const Features s_next = normalize(out.next_state, env.config());
        agent.observe(Transition{s, a, out.reward, s_next, out.terminal});
        rec.reward_total += out.reward;
        rec.violations += out.violated ? 1 : 0;
        t_sum += out.breakdown.t_total_s;
        ++steps;
        s = s_next;
        if (out.terminal) break;
    }
    rec.reward_mean = rec.reward_total / steps;
    rec.mean_t_total = t_sum / steps;
    schedule.advance();
    return rec;
}

}  // namespace mvap
