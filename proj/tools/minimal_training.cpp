// Library usage without the harness: train a Double DQN agent for a few
// episodes, then compare its greedy split with the best split found by search.

#include <cstdio>

#include "mvap/agents.hpp"
#include "mvap/environment.hpp"

int main() {
    mvap::EnvConfig env_cfg;
    mvap::AgentParams params;
    params.hidden_layers = {64, 64};

    const std::uint64_t seed = 7;
    const int episodes = 30;
    mvap::Environment env(env_cfg, seed);
    auto agent = mvap::make_agent(mvap::Algorithm::Ddqn, env_cfg, params, seed);
    auto schedule = mvap::ExplorationSchedule::for_run(params, episodes);

    for (int e = 1; e <= episodes; ++e) {
        const auto rec = mvap::train_episode(*agent, env, schedule, e);
        if (e % 5 == 0)
            std::printf("episode %3d  reward/step %6.2f  violations %3d  epsilon %.3f\n", e, rec.reward_mean,
                        rec.violations, rec.epsilon);
    }

    env.reset();
    const auto b = static_cast<std::uint64_t>(env.state().b_total_bits);
    const int greedy = agent->act(env.features(), 0.0);
    int best = 0;
    double best_t = 1e300;
    for (int k = 0; k < env.action_count(); ++k) {
        const auto off = (static_cast<std::uint64_t>(k) * b + env_cfg.split_factor - 1) / env_cfg.split_factor;
        const double t = env.evaluate(b - off, off).t_total_s;
        if (t < best_t) {
            best_t = t;
            best = k;
        }
    }
    const auto g_off = (static_cast<std::uint64_t>(greedy) * b + env_cfg.split_factor - 1) / env_cfg.split_factor;
    std::printf("requirement %.3f s\n", env.t_require());
    std::printf("greedy split k=%d  latency %.3f s\n", greedy, env.evaluate(b - g_off, g_off).t_total_s);
    std::printf("best split   k=%d  latency %.3f s\n", best, best_t);
}
