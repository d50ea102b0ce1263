#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aapi/config.hpp"
#include "aapi/report.hpp"
#include "aapi/verify.hpp"

using namespace aapi;
namespace fs = std::filesystem;

namespace {

nlohmann::json minimal_config() {
    return nlohmann::json{{"env", {{"id", "hazard_gridworld"}, {"n", 3}, {"epsilon", 1.0}}},
                          {"algorithm", {{"name", "oapi"}}},
                          {"run", {{"seeds", {0}}, {"episodes", 1}}}};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("aapi_test_" + std::to_string(rng_stream(std::random_device{}(), 0)()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args) {
    std::string cmd = std::string(AAPI_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("experiment config parsing fills defaults and resolves them") {
    ExperimentConfig cfg = parse_experiment_config(minimal_config());
    CHECK(cfg.env.id == "hazard_gridworld");
    CHECK(cfg.algorithm == "oapi");
    CHECK(cfg.tabular());
    CHECK(cfg.resolved.at("algorithm").at("tol") == 1e-10);
    CHECK(cfg.resolved.at("env").at("gamma") == 0.95);
}

TEST_CASE("unknown keys are rejected with their path") {
    nlohmann::json j = minimal_config();
    j["env"]["typo"] = 1;
    CHECK_THROWS_WITH_AS(parse_experiment_config(j), doctest::Contains("env"), ConfigError);
    j = minimal_config();
    j["algorithm"]["batch_size"] = 3;  // not a tabular knob
    CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
    j = minimal_config();
    j["mystery"] = {};
    CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
}

TEST_CASE("config validation errors") {
    nlohmann::json j = minimal_config();
    j["env"]["id"] = "cartpole";
    CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
    j = minimal_config();
    j["algorithm"]["name"] = "dqn";
    CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
    j = minimal_config();
    j["run"]["seeds"] = nlohmann::json::array();
    CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
    j = minimal_config();
    j["attack"] = {{{"kind", "min_q"}, {"epsilon", 0.2}, {"critic_source", "supplied"}}};
    CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);  // supplied without a path
}

TEST_CASE("deep algorithm blocks parse into trainer configs") {
    nlohmann::json j{{"env", {{"id", "double_integrator"}}},
                     {"algorithm",
                      {{"name", "oa_td3"}, {"epsilon", 0.2}, {"omega", 0.5}, {"total_steps", 5000}}},
                     {"run", {{"seeds", {1, 2}}, {"episodes", 4}}}};
    ExperimentConfig cfg = parse_experiment_config(j);
    CHECK(cfg.td3.epsilon == 0.2);
    CHECK(cfg.td3.omega == 0.5);
    CHECK(cfg.td3.train_oa);
    j["algorithm"]["name"] = "td3";
    ExperimentConfig plain = parse_experiment_config(j);
    CHECK(!plain.td3.train_oa);
    CHECK(plain.td3.omega == 1.0);  // baseline forces the nominal objective
    CHECK(plain.td3.epsilon == 0.0);
}

TEST_CASE("checkpoint json round trip") {
    auto rng = rng_stream(60, 0);
    Checkpoint ck;
    ck.algorithm = "oa_td3";
    ck.env_id = "double_integrator";
    ck.epsilon = 0.2;
    ck.omega = 0.5;
    ck.seed = 9;
    ck.step = 1000;
    ck.has_nets = true;
    ck.actor = detail::make_actor(2, 1, {8}, rng);
    ck.critic1 = detail::make_critic(2, 1, {8}, rng);
    ck.critic2 = detail::make_critic(2, 1, {8}, rng);
    ck.oa_critic = detail::make_critic(2, 1, {8}, rng);
    ck.has_twin = ck.has_oa = true;
    Checkpoint back = checkpoint_from_json(checkpoint_to_json(ck));
    CHECK(back.actor.params == ck.actor.params);
    CHECK(back.oa_critic.params == ck.oa_critic.params);
    CHECK(back.epsilon == ck.epsilon);
    CHECK(back.seed == ck.seed);

    nlohmann::json bad = checkpoint_to_json(ck);
    bad["format_version"] = 99;
    CHECK_THROWS_AS(checkpoint_from_json(bad), ConfigError);
}

TEST_CASE("summary table round trips losslessly") {
    RunSummary s;
    s.env_id = "hazard_gridworld";
    s.algorithm = "oapi";
    s.rows.push_back({"nominal", 0.0, -19.999999998109153, 0.0, 1, {-19.999999998109153}});
    s.rows.push_back({"min_oa_q", 1.0, -1.0 / 3.0, 0.25, 10, {-0.3, -1.0 / 3.0}});
    RunSummary back = parse_summary_table(render_summary_table(s));
    CHECK(back.env_id == s.env_id);
    CHECK(back.algorithm == s.algorithm);
    REQUIRE(back.rows.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back.rows[i].attack == s.rows[i].attack);
        CHECK(back.rows[i].epsilon == s.rows[i].epsilon);
        CHECK(back.rows[i].mean == s.rows[i].mean);
        CHECK(back.rows[i].stderr_ == s.rows[i].stderr_);
        CHECK(back.rows[i].n == s.rows[i].n);
        CHECK(back.rows[i].per_seed_means == s.rows[i].per_seed_means);
    }
    nlohmann::json j1 = summary_to_json(s);
    nlohmann::json j2 = summary_to_json(summary_from_json(j1));
    CHECK(j1 == j2);
}

TEST_CASE("n-score table against matched baselines") {
    RunSummary z0{"e", "a", {{"nominal", 0.0, -200.0, 0.0, 1, {-200.0}}}};
    RunSummary z1{"e", "b", {{"nominal", 0.0, -20.0, 0.0, 1, {-20.0}}}};
    RunSummary run{"e", "c", {{"nominal", 0.0, -65.0, 0.0, 3, {-60.0, -65.0, -70.0}}}};
    auto table = n_score_table({{"run", run}}, z0, z1);
    REQUIRE(table.size() == 1);
    CHECK(table[0].mean_n_score == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(table[0].n == 3);

    auto self = n_score_table({{"z1", z1}}, z0, z1);
    CHECK(self[0].mean_n_score == doctest::Approx(1.0));

    RunSummary missing{"e", "d", {{"random", 0.3, -50.0, 0.0, 1, {-50.0}}}};
    CHECK_THROWS_WITH_AS(n_score_table({{"m", missing}}, z0, z1), doctest::Contains("Z0"),
                         ConfigError);
    CHECK_THROWS_AS(n_score_table({{"z", z1}}, z1, z1), ConfigError);  // degenerate baselines
}

TEST_CASE("cli: tabular train is deterministic and epsilon 0 matches vanilla pi") {
    TempDir tmp;
    nlohmann::json j = minimal_config();
    j["env"]["epsilon"] = 0.0;
    write_file(tmp.path / "oapi.json", j.dump());
    j["algorithm"]["name"] = "pi";
    write_file(tmp.path / "pi.json", j.dump());

    std::string base = "train --config " + (tmp.path / "oapi.json").string();
    CHECK(run_cli(base + " --out " + (tmp.path / "a").string()) == 0);
    CHECK(run_cli(base + " --out " + (tmp.path / "b").string()) == 0);
    CHECK(read_file(tmp.path / "a" / "checkpoint.json") ==
          read_file(tmp.path / "b" / "checkpoint.json"));

    CHECK(run_cli("train --config " + (tmp.path / "pi.json").string() + " --out " +
                  (tmp.path / "c").string()) == 0);
    Checkpoint oa = checkpoint_from_json(
        nlohmann::json::parse(read_file(tmp.path / "a" / "checkpoint.json")));
    Checkpoint pi = checkpoint_from_json(
        nlohmann::json::parse(read_file(tmp.path / "c" / "checkpoint.json")));
    CHECK(oa.policy_actions == pi.policy_actions);
}

TEST_CASE("cli: exit codes for config problems") {
    TempDir tmp;
    CHECK(run_cli("train --config " + (tmp.path / "nope.json").string()) == 2);
    write_file(tmp.path / "bad.json", "{\"env\": {\"id\": \"unknown_env\"}}");
    CHECK(run_cli("train --config " + (tmp.path / "bad.json").string()) == 2);
    nlohmann::json j = minimal_config();
    j["run"].erase("seeds");
    j["extra_key"] = 1;
    write_file(tmp.path / "unknown.json", j.dump());
    CHECK(run_cli("train --config " + (tmp.path / "unknown.json").string()) == 2);
}

TEST_CASE("cli: attack refuses a checkpoint from another environment") {
    TempDir tmp;
    nlohmann::json j = minimal_config();
    j["attack"] = {{{"kind", "nominal"}}};
    write_file(tmp.path / "cfg.json", j.dump());
    CHECK(run_cli("train --config " + (tmp.path / "cfg.json").string() + " --out " +
                  (tmp.path / "run").string()) == 0);
    nlohmann::json ck =
        nlohmann::json::parse(read_file(tmp.path / "run" / "checkpoint.json"));
    ck["env_id"] = "maze2d";
    write_file(tmp.path / "run" / "wrong.json", ck.dump());
    CHECK(run_cli("attack --config " + (tmp.path / "cfg.json").string() + " --checkpoint " +
                  (tmp.path / "run" / "wrong.json").string() + " --out " +
                  (tmp.path / "atk").string()) == 2);
}

TEST_CASE("cli: full tabular attack ordering and report n-scores") {
    TempDir tmp;
    nlohmann::json j = minimal_config();
    j["attack"] = {{{"kind", "nominal"}},
                   {{"kind", "random"}, {"epsilon", 1.0}},
                   {{"kind", "biggest"}, {"epsilon", 1.0}},
                   {{"kind", "min_q"}, {"epsilon", 1.0}},
                   {{"kind", "min_oa_q"}, {"epsilon", 1.0}}};
    write_file(tmp.path / "oapi.json", j.dump());
    j["algorithm"]["name"] = "pi";
    write_file(tmp.path / "pi.json", j.dump());

    for (std::string alg : {"oapi", "pi"}) {
        CHECK(run_cli("train --config " + (tmp.path / (alg + ".json")).string() + " --out " +
                      (tmp.path / ("run_" + alg)).string()) == 0);
        CHECK(run_cli("attack --config " + (tmp.path / (alg + ".json")).string() +
                      " --checkpoint " + (tmp.path / ("run_" + alg) / "checkpoint.json").string() +
                      " --out " + (tmp.path / ("atk_" + alg)).string()) == 0);
    }
    RunSummary vanilla = summary_from_json(
        nlohmann::json::parse(read_file(tmp.path / "atk_pi" / "summary.json")));
    auto value = [&](const std::string& attack) {
        for (const SummaryRow& r : vanilla.rows)
            if (r.attack == attack) return r.mean;
        throw ConfigError("missing attack row " + attack);
    };
    CHECK(value("nominal") >= value("random") - 1e-10);
    CHECK(value("random") >= value("min_oa_q") - 1e-10);
    CHECK(value("biggest") >= value("min_oa_q") - 1e-10);
    CHECK(value("min_q") >= value("min_oa_q") - 1e-10);

    RunSummary robust = summary_from_json(
        nlohmann::json::parse(read_file(tmp.path / "atk_oapi" / "summary.json")));
    double worst_robust = 0.0, worst_vanilla = value("min_oa_q");
    for (const SummaryRow& r : robust.rows)
        if (r.attack == "min_oa_q") worst_robust = r.mean;
    CHECK(worst_robust > worst_vanilla + 1.0);  // strict robustness margin

    CHECK(run_cli("report " + (tmp.path / "atk_oapi").string() + " --z0 " +
                  (tmp.path / "atk_pi").string() + " --z1 " + (tmp.path / "atk_oapi").string() +
                  " --out " + (tmp.path / "rep").string()) == 0);
    std::string agg = read_file(tmp.path / "rep" / "aggregate.csv");
    CHECK(agg.find("min_oa_q,1,1,0,1") != std::string::npos);

    // table text written by the attack command parses back to the same summary
    RunSummary parsed = parse_summary_table(read_file(tmp.path / "atk_pi" / "table.txt"));
    CHECK(summary_to_json(parsed) == summary_to_json(vanilla));
}

TEST_CASE("theorem property suite passes") {
    for (const PropertyResult& r : run_theorem_suite(123)) {
        INFO(r.name << " " << r.detail);
        CHECK(r.passed);
    }
}
