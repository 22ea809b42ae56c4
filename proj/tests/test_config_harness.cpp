#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mvap/config.hpp"
#include "mvap/harness.hpp"

using namespace mvap;

namespace {

std::string config_error(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ConfigError) << e.what();
        return e.what();
    }
    ADD_FAILURE() << "config accepted: " << text;
    return {};
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("mvap_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

ExperimentConfig small_campaign(const std::string& out) {
    ExperimentConfig cfg;
    cfg.env.split_factor = 20;
    cfg.env.steps_per_episode = 10;
    cfg.agent.hidden_layers = {16};
    cfg.episodes = 4;
    cfg.seeds = {7};
    cfg.output_dir = out;
    cfg.moving_average_window = 2;
    cfg.plateau_window = 2;
    cfg.threads = 1;
    return cfg;
}

const std::filesystem::path kDefaultConfig = MVAP_SOURCE_DIR "/configs/default.json";

}  // namespace

TEST(Config, EmptyObjectGivesDefaults) {
    const auto cfg = parse_config_text("{}");
    EXPECT_EQ(cfg.episodes, 1000);
    EXPECT_EQ(cfg.env.split_factor, 1000);
    EXPECT_EQ(cfg.algorithms.size(), 4u);
}

TEST(Config, ShippedDefaultCarriesTableValues) {
    const auto cfg = load_config(kDefaultConfig.string());
    const auto& e = cfg.env;
    EXPECT_EQ(e.compute.f_mvap_hz, 10.5e9);
    EXPECT_EQ(e.compute.f_ecs_hz, 20.5e9);
    EXPECT_EQ(e.scenario.num_mvds, 3);
    EXPECT_EQ(e.compute.complexity_cycles_per_bit, 650.0);
    EXPECT_EQ(e.channel.noise_variance_w, 1e-11);
    EXPECT_EQ(e.mvd.tx_power_w, 0.52);
    EXPECT_EQ(e.mvd.sensing_time_s, 0.5);
    EXPECT_EQ(e.mvd.sensing_rate_pps, 5.0);
    EXPECT_EQ(e.channel.capacity_gap, 1.2);
    EXPECT_EQ(e.channel.pathloss_ref, 1e-6);
    EXPECT_EQ(e.channel.pathloss_exponent, 2.2);
    EXPECT_EQ(e.scenario.distance_min_m, 160.0);
    EXPECT_EQ(e.scenario.distance_max_m, 210.0);
    EXPECT_EQ(cfg.agent.learning_rate, 0.001);
    EXPECT_EQ(cfg.agent.batch_size, 10);
    EXPECT_EQ(cfg.agent.discount, 0.9985);
    EXPECT_EQ(cfg.agent.epsilon_start, 1.0);
    EXPECT_EQ(cfg.agent.epsilon_min, 0.001);
    EXPECT_EQ(cfg.agent.tau, 0.001);
    EXPECT_EQ(cfg.agent.gradient_clip_norm, 100.0);
    EXPECT_EQ(e.sinr_transition, default_sinr_transition());
    EXPECT_EQ(cfg.episodes, 1000);
    EXPECT_EQ(cfg.seeds.size(), 3u);
}

TEST(Config, UnknownKeysReportFullPath) {
    EXPECT_NE(config_error(R"({"systm": {}})").find("systm"), std::string::npos);
    EXPECT_NE(config_error(R"({"system": {"compute": {"f_mvap": 1}}})").find("system.compute.f_mvap"),
              std::string::npos);
    EXPECT_NE(config_error(R"({"agent": {"epsilon": {"end": 0.1}}})").find("agent.epsilon.end"), std::string::npos);
}

TEST(Config, TypeAndRangeErrors) {
    EXPECT_NE(config_error(R"({"mdp": {"split_factor": 0}})").find("mdp.split_factor"), std::string::npos);
    EXPECT_NE(config_error(R"({"experiment": {"episodes": 0}})").find("experiment.episodes"), std::string::npos);
    EXPECT_NE(config_error(R"({"experiment": {"seeds": []}})").find("experiment.seeds"), std::string::npos);
    EXPECT_NE(config_error(R"({"experiment": {"episodes": "ten"}})").find("experiment.episodes"), std::string::npos);
    EXPECT_NE(config_error(R"({"experiment": {"algorithms": ["sarsa"]}})").find("experiment.algorithms"),
              std::string::npos);
    EXPECT_NE(config_error(R"({"agent": {"discount": 1.5}})").find("agent.discount"), std::string::npos);
    EXPECT_NE(config_error(R"({"agent": {"gradient_clip_norm": 0}})").find("agent.gradient_clip_norm"),
              std::string::npos);
    EXPECT_NE(config_error(R"({"system": {"mvd": {"sensing_rate_pps": 0}}})").find("system.mvd.sensing_rate_pps"),
              std::string::npos);
    config_error(R"({"reward": {"positive": -1, "negative": 20}})");
    config_error("{not json");
}

TEST(Config, TransitionMatrixChecks) {
    const std::string raw = R"({"sinr": {"normalize_rows": false, "transition": [
        [0.600, 0.250, 0.100, 0.040, 0.010], [0.250, 0.300, 0.250, 0.100, 0.040],
        [0.100, 0.250, 0.320, 0.250, 0.100], [0.040, 0.100, 0.250, 0.300, 0.250],
        [0.010, 0.040, 0.100, 0.250, 0.600]]}})";
    EXPECT_NE(config_error(raw).find("sinr"), std::string::npos);
    config_error(R"({"sinr": {"transition": [[1.0]]}})");
}

TEST(Config, CommentsAndOverrides) {
    const auto cfg = parse_config_text(R"({
        // fixed requirement for a sweep point
        "system": {"t_require": {"fixed_s": 1.8}},
        "experiment": {"algorithms": ["ddqn"], "seeds": [9], "episodes": 3}
    })");
    EXPECT_EQ(cfg.env.scenario.t_require_fixed_s, 1.8);
    ASSERT_EQ(cfg.algorithms.size(), 1u);
    EXPECT_EQ(cfg.algorithms[0], Algorithm::Ddqn);
    EXPECT_EQ(cfg.seeds[0], 9u);
    EXPECT_FALSE(parse_config_text(R"({"agent": {"gradient_clip_norm": null}})").agent.gradient_clip_norm);
    EXPECT_EQ(parse_config_text(R"({"agent": {"gradient_clip_norm": 2.5}})").agent.gradient_clip_norm, 2.5);
}

TEST(Config, MissingFileIsIoError) {
    try {
        load_config("/nonexistent/config.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::IoError);
    }
}

TEST(MovingAverage, TrailingWindow) {
    const std::vector<double> v{1, 2, 3, 4, 5};
    EXPECT_EQ(moving_average(v, 2), (std::vector<double>{1, 1.5, 2.5, 3.5, 4.5}));
    EXPECT_EQ(moving_average(v, 1), v);
    EXPECT_EQ(moving_average(v, 10), (std::vector<double>{1, 1.5, 2, 2.5, 3}));
    EXPECT_THROW(moving_average(v, 0), Error);
}

TEST(ConvergenceEpisode, FirstCrossing) {
    const std::vector<double> ma{0, 5, 10, 18.9, 19.0, 19.5, 20};
    EXPECT_EQ(convergence_episode(ma, 20.0, 0.95), 5);
    EXPECT_EQ(convergence_episode(ma, 30.0, 0.95), 7);
    const std::vector<double> neg{-1, -0.9, -0.8};
    EXPECT_EQ(convergence_episode(neg, -0.8, 0.95), 3);
    EXPECT_EQ(convergence_episode(neg, -0.9, 0.95), 2);
    EXPECT_EQ(tail_mean(ma, 2), 19.75);
}

TEST(Csv, FieldQuoting) {
    EXPECT_EQ(csv_field("plain"), "plain");
    EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(csv_number(1.0), "1.000000");
}

TEST(Csv, RunFileNames) {
    EXPECT_EQ(run_file_name({Algorithm::Ddqn, 3, std::nullopt}), "ddqn_seed3.csv");
    EXPECT_EQ(run_file_name({Algorithm::QLearning, 1, 1.8}), "treq1.800_ql_seed1.csv");
}

TEST(Campaign, OneEpisodeGivesOneRowPerAlgorithm) {
    const auto dir = scratch_dir("one_episode");
    auto cfg = small_campaign(dir.string());
    cfg.episodes = 1;
    const auto c = run_campaign(cfg);
    for (Algorithm a : cfg.algorithms) {
        const std::string csv = read_file(dir / run_file_name({a, 7, std::nullopt}));
        EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2) << to_string(a);
        EXPECT_EQ(csv.rfind("episode,reward_total,reward_mean,violations,mean_t_total,epsilon\r\n", 0), 0u);
    }
    EXPECT_TRUE(std::filesystem::exists(dir / "summary.txt"));
    EXPECT_TRUE(std::filesystem::exists(dir / "curves.csv"));
    EXPECT_EQ(read_file(dir / "convergence.svg").rfind("<svg", 0), 0u);
    EXPECT_EQ(c.summary.curves.size(), 4u);
    std::filesystem::remove_all(dir);
}

TEST(Campaign, RowCountEqualsEpisodes) {
    const auto dir = scratch_dir("rows");
    auto cfg = small_campaign(dir.string());
    cfg.algorithms = {Algorithm::Dqn};
    const auto c = run_campaign(cfg);
    const std::string csv = read_file(dir / "dqn_seed7.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), cfg.episodes + 1);
    for (const auto& r : c.runs.front().records) EXPECT_LE(r.violations, cfg.env.steps_per_episode);
    std::filesystem::remove_all(dir);
}

TEST(Campaign, IdenticalConfigGivesIdenticalBytes) {
    const auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
    auto cfg = small_campaign(a.string());
    cfg.seeds = {3, 4};
    cfg.threads = 2;
    run_campaign(cfg);
    cfg.output_dir = b.string();
    cfg.threads = 1;
    run_campaign(cfg);
    for (const auto& entry : std::filesystem::directory_iterator(a)) {
        const auto name = entry.path().filename();
        EXPECT_EQ(read_file(entry.path()), read_file(b / name)) << name;
    }
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
}

TEST(Campaign, UnboundedRequirementAlwaysRewards) {
    auto cfg = small_campaign(scratch_dir("unbounded").string());
    const auto table = sweep_requirement(cfg, std::vector<double>{1e6}, false);
    for (double v : table.final_reward.front()) EXPECT_EQ(v, 20.0);
}

TEST(EmitOutputs, EmptyRecordsWriteNothing) {
    const auto dir = scratch_dir("empty");
    CampaignSummary s;
    try {
        emit_outputs({}, s, dir.string());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InvalidParameter);
    }
    std::vector<RunResult> runs{RunResult{{Algorithm::Dqn, 1, std::nullopt}, {}}};
    EXPECT_THROW(emit_outputs(runs, s, dir.string()), Error);
    EXPECT_FALSE(std::filesystem::exists(dir));
}

TEST(EmitOutputs, UnwritableDirectoryIsIoError) {
    auto cfg = small_campaign("/proc/mvap_cannot_write_here");
    cfg.episodes = 1;
    cfg.algorithms = {Algorithm::Random};
    try {
        run_campaign(cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::IoError);
    }
}

TEST(Sweep, TableShapeAndCsv) {
    const auto dir = scratch_dir("sweep");
    auto cfg = small_campaign(dir.string());
    cfg.algorithms = {Algorithm::Random, Algorithm::QLearning};
    const std::vector<double> t{1.5, 2.0};
    const auto table = sweep_requirement(cfg, t);
    ASSERT_EQ(table.final_reward.size(), 2u);
    EXPECT_EQ(table.final_reward[0].size(), 2u);
    const std::string csv = read_file(dir / "sweep.csv");
    EXPECT_EQ(csv.rfind("t_require,rm,ql\r\n", 0), 0u);
    EXPECT_TRUE(std::filesystem::exists(dir / "sweep" / "treq1.500_rm_seed7.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "requirement_sweep.svg"));
    EXPECT_THROW(sweep_requirement(cfg, std::vector<double>{}, false), Error);
    EXPECT_THROW(sweep_requirement(cfg, std::vector<double>{-1.0}, false), Error);
    std::filesystem::remove_all(dir);
}

TEST(SvgChart, EscapesAndRendersSeries) {
    ChartSpec spec;
    spec.title = "a < b & c";
    spec.series.push_back({"S", {1, 2, 3}, {0, 1, 4}});
    const auto svg = render_line_chart(spec);
    EXPECT_NE(svg.find("a &lt; b &amp; c"), std::string::npos);
    EXPECT_NE(svg.find("<polyline"), std::string::npos);
    EXPECT_EQ(svg.substr(svg.size() - 7), "</svg>\n");
}
