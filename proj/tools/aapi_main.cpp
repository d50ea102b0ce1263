#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include "aapi/config.hpp"
#include "aapi/oapi.hpp"
#include "aapi/report.hpp"
#include "aapi/verify.hpp"

namespace fs = std::filesystem;
using namespace aapi;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitNonConvergence = 4;

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

fs::path resolve_out_dir(const std::string& flag_out, const std::string& config_out) {
    if (!flag_out.empty()) return flag_out;
    if (!config_out.empty()) return config_out;
    if (const char* env = std::getenv("AAPI_OUT")) return env;
    return "runs";
}

std::string csv_double(double v) { return format_double(v); }

// --- train ---

void train_tabular(const ExperimentConfig& cfg, const fs::path& out) {
    HazardGridworld gw =
        make_hazard_gridworld(cfg.env.n, cfg.env.hazard_penalty, cfg.env.epsilon, cfg.env.gamma);
    Checkpoint ck;
    ck.algorithm = cfg.algorithm;
    ck.env_id = cfg.env.id;
    ck.epsilon = cfg.algorithm == "oapi" ? cfg.env.epsilon : 0.0;
    ck.has_tabular = true;
    ck.n_states = gw.mdp.n_states;
    ck.n_actions = gw.mdp.n_actions();

    std::ostringstream csv;
    csv << "iteration,objective,policy_changed\n";
    if (cfg.algorithm == "oapi") {
        OaPiResult res;
        try {
            res = oa_policy_iteration(gw.mdp, cfg.tol);
        } catch (const ConvergenceError& e) {
            fs::path trace = out / "trace.txt";
            write_text_file(trace, std::string(e.what()) + "\n");
            throw ConvergenceError(std::string(e.what()) + " (trace: " + trace.string() + ")");
        }
        ck.policy_actions = res.policy.action;
        ck.q_values = res.q_adv.values;
        ck.step = static_cast<long>(res.trace.size());
        for (const OaPiTraceRow& row : res.trace)
            csv << row.iteration << ',' << csv_double(row.objective) << ','
                << (row.policy_changed ? 1 : 0) << '\n';
    } else {
        auto [pi, q] = policy_iteration(gw.mdp, cfg.tol);
        ck.policy_actions = pi.action;
        ck.q_values = q.values;
        QTable qeval = policy_evaluation(pi, gw.mdp, cfg.tol);
        csv << "0," << csv_double(rho_objective(state_values(qeval, pi), gw.mdp)) << ",0\n";
    }
    write_json_file(out / "checkpoint.json", checkpoint_to_json(ck));
    write_text_file(out / "train.csv", csv.str());
}

void train_deep_seed(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& out) {
    std::unique_ptr<Env> env = make_continuous_env(cfg.env);
    Checkpoint ck;
    ck.algorithm = cfg.algorithm;
    ck.env_id = cfg.env.id;
    ck.seed = seed;
    ck.has_nets = true;

    std::ostringstream csv;
    csv << "step,episode,nominal_return,critic_loss,oa_critic_loss,conflict_rate\n";
    if (cfg.td3_family()) {
        Td3Config tc = cfg.td3;
        tc.seed = seed;
        Td3Result res = oa_td3_train(*env, tc);
        ck.epsilon = tc.epsilon;
        ck.omega = tc.omega;
        ck.step = tc.total_steps;
        ck.actor = res.actor;
        ck.critic1 = res.critic1;
        ck.critic2 = res.critic2;
        ck.has_twin = true;
        if (tc.train_oa) {
            ck.oa_critic = res.oa_critic;
            ck.has_oa = true;
        }
        for (const Td3LogRow& r : res.log)
            csv << r.step << ',' << r.episode << ',' << csv_double(r.nominal_return) << ','
                << csv_double(r.critic_loss) << ',' << csv_double(r.oa_critic_loss) << ','
                << csv_double(r.conflict_rate) << '\n';
    } else {
        PpoConfig pc = cfg.ppo;
        pc.seed = seed;
        PpoResult res = oa_ppo_train(*env, pc);
        ck.epsilon = pc.epsilon;
        ck.omega = pc.omega;
        ck.step = pc.total_steps;
        ck.actor = res.policy.mean_net;
        ck.log_std = res.policy.log_std;
        if (pc.train_oa) {
            ck.oa_critic = res.oa_critic;
            ck.has_oa = true;
        }
        for (const PpoLogRow& r : res.log)
            csv << r.step << ',' << r.episode << ',' << csv_double(r.nominal_return) << ','
                << csv_double(r.critic_loss) << ',' << csv_double(r.oa_critic_loss) << ','
                << csv_double(r.conflict_rate) << '\n';
    }
    std::string tag = "_seed" + std::to_string(seed);
    write_json_file(out / ("checkpoint" + tag + ".json"), checkpoint_to_json(ck));
    write_text_file(out / ("train" + tag + ".csv"), csv.str());
}

int cmd_train(const std::string& config_path, const std::string& out_flag, long seed_override,
              int jobs) {
    ExperimentConfig cfg = parse_experiment_config(read_json_file(config_path));
    if (cfg.algorithm.empty()) throw ConfigError("config: missing 'algorithm' for train");
    fs::path out = resolve_out_dir(out_flag, cfg.run.out);
    fs::create_directories(out);
    write_json_file(out / "config.resolved.json", cfg.resolved);

    if (cfg.tabular()) {
        train_tabular(cfg, out);
        std::cout << "wrote " << (out / "checkpoint.json").string() << "\n";
        return kExitOk;
    }
    std::vector<std::uint64_t> seeds = cfg.run.seeds;
    if (seed_override >= 0) seeds = {static_cast<std::uint64_t>(seed_override)};

    std::mutex err_mutex;
    std::vector<std::string> errors;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= seeds.size()) return;
            try {
                train_deep_seed(cfg, seeds[i], out);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(err_mutex);
                errors.push_back(e.what());
            }
        }
    };
    int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(seeds.size())));
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (!errors.empty()) throw NumericError(errors.front());
    std::cout << "wrote " << seeds.size() << " checkpoint(s) under " << out.string() << "\n";
    return kExitOk;
}

// --- attack ---

DenseNet load_supplied_critic(const AttackEntry& entry) {
    Checkpoint c = checkpoint_from_json(read_json_file(entry.critic_checkpoint));
    if (entry.spec.kind == AttackKind::MinOaQ) {
        if (!c.has_oa)
            throw ConfigError("attack: supplied checkpoint has no robustness critic: " +
                              entry.critic_checkpoint);
        return c.oa_critic;
    }
    if (!c.has_twin)
        throw ConfigError("attack: supplied checkpoint has no value critic: " +
                          entry.critic_checkpoint);
    return c.critic1;
}

int cmd_attack(const std::string& config_path, const std::string& checkpoint_path,
               const std::string& out_flag, int /*jobs*/) {
    ExperimentConfig cfg = parse_experiment_config(read_json_file(config_path));
    if (cfg.attacks.empty()) throw ConfigError("config: attack command needs an 'attack' list");
    Checkpoint ck = checkpoint_from_json(read_json_file(checkpoint_path));
    if (ck.env_id != cfg.env.id)
        throw ConfigError("attack: checkpoint env '" + ck.env_id + "' does not match config env '" +
                          cfg.env.id + "'");
    fs::path out = resolve_out_dir(out_flag, cfg.run.out);
    fs::create_directories(out);
    write_json_file(out / "config.resolved.json", cfg.resolved);

    RunSummary summary;
    summary.env_id = cfg.env.id;
    summary.algorithm = ck.algorithm;
    std::ostringstream csv;
    csv << "env,algorithm,attack,epsilon,seed,episode,return\n";

    if (ck.has_tabular) {
        HazardGridworld gw =
            make_hazard_gridworld(cfg.env.n, cfg.env.hazard_penalty, cfg.env.epsilon, cfg.env.gamma);
        if (gw.mdp.n_states != ck.n_states || gw.mdp.n_actions() != ck.n_actions)
            throw ConfigError("attack: checkpoint shape does not match the configured gridworld");
        TabularPolicy pi = TabularPolicy::make_deterministic(ck.policy_actions, ck.n_actions);
        for (const AttackEntry& entry : cfg.attacks) {
            // tabular values are exact; epsilon is the mdp neighborhood radius
            double value = tabular_attack_value(gw.mdp, pi, entry.spec.kind);
            SummaryRow row;
            row.attack = attack_kind_name(entry.spec.kind);
            row.epsilon = entry.spec.epsilon;
            row.mean = value;
            row.stderr_ = 0.0;
            row.n = 1;
            row.per_seed_means = {value};
            summary.rows.push_back(row);
            csv << cfg.env.id << ',' << ck.algorithm << ',' << row.attack << ','
                << csv_double(row.epsilon) << ",0,0," << csv_double(value) << '\n';
        }
    } else {
        std::unique_ptr<Env> env = make_continuous_env(cfg.env);
        for (const AttackEntry& entry : cfg.attacks) {
            DenseNet critic;
            bool have_critic = false;
            if (entry.spec.needs_critic()) {
                if (entry.critic_source == "supplied") {
                    critic = load_supplied_critic(entry);
                } else {
                    AttackCriticConfig acfg;
                    acfg.total_steps = entry.critic_steps;
                    acfg.seed = ck.seed;
                    AttackCriticMode mode = entry.spec.kind == AttackKind::MinOaQ
                                                ? AttackCriticMode::Oa
                                                : AttackCriticMode::Standard;
                    std::unique_ptr<Env> tenv = make_continuous_env(cfg.env);
                    critic = train_attack_critic(ck.actor, *tenv, entry.spec.epsilon, mode, acfg);
                }
                have_critic = true;
            }
            EvalReport rep = evaluate(ck.actor, *env, entry.spec, cfg.run.episodes, cfg.run.seeds,
                                      have_critic ? &critic : nullptr);
            SummaryRow row;
            row.attack = attack_kind_name(entry.spec.kind);
            row.epsilon = entry.spec.epsilon;
            row.mean = rep.mean;
            row.stderr_ = rep.stderr_;
            row.n = rep.n;
            for (std::size_t s = 0; s < rep.seeds.size(); ++s) {
                double m = 0.0;
                for (int e = 0; e < cfg.run.episodes; ++e)
                    m += rep.returns[s * cfg.run.episodes + e] / cfg.run.episodes;
                row.per_seed_means.push_back(m);
            }
            summary.rows.push_back(row);
            for (std::size_t s = 0; s < rep.seeds.size(); ++s)
                for (int e = 0; e < cfg.run.episodes; ++e)
                    csv << cfg.env.id << ',' << ck.algorithm << ',' << row.attack << ','
                        << csv_double(row.epsilon) << ',' << rep.seeds[s] << ',' << e << ','
                        << csv_double(rep.returns[s * cfg.run.episodes + e]) << '\n';
        }
    }

    write_text_file(out / "report.csv", csv.str());
    write_json_file(out / "summary.json", summary_to_json(summary));
    write_text_file(out / "table.txt", render_summary_table(summary));
    std::cout << render_summary_table(summary);
    return kExitOk;
}

// --- report ---

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& z0_dir,
               const std::string& z1_dir, const std::string& out_flag) {
    if (run_dirs.empty()) throw ConfigError("report: need at least one run directory");
    auto load_summary = [](const std::string& dir, const std::string& role) {
        fs::path p = fs::path(dir) / "summary.json";
        if (!fs::exists(p)) throw ConfigError("report: " + role + " summary missing: " + p.string());
        return summary_from_json(read_json_file(p.string()));
    };
    RunSummary z0 = load_summary(z0_dir, "Z0 baseline");
    RunSummary z1 = load_summary(z1_dir, "Z1 baseline");
    std::vector<std::pair<std::string, RunSummary>> runs;
    for (const std::string& dir : run_dirs) runs.emplace_back(dir, load_summary(dir, "run"));
    std::vector<NScoreRow> table = n_score_table(runs, z0, z1);

    fs::path out = resolve_out_dir(out_flag, "");
    fs::create_directories(out);
    std::ostringstream csv;
    csv << "run,attack,epsilon,mean_n_score,stderr,n\n";
    for (const NScoreRow& r : table)
        csv << r.run << ',' << r.attack << ',' << csv_double(r.epsilon) << ','
            << csv_double(r.mean_n_score) << ',' << csv_double(r.stderr_) << ',' << r.n << '\n';
    write_text_file(out / "aggregate.csv", csv.str());
    std::cout << csv.str();

    // plot data: nominal-return training curves normalized by the baselines
    const SummaryRow* b0 = find_row(z0, "nominal", z0.rows.empty() ? 0.0 : z0.rows[0].epsilon);
    const SummaryRow* b1 = find_row(z1, "nominal", z1.rows.empty() ? 0.0 : z1.rows[0].epsilon);
    if (b0 && b1 && b0->mean != b1->mean) {
        std::ostringstream plot;
        plot << "run,step,mean_n_score,stderr\n";
        for (const std::string& dir : run_dirs) {
            // per-episode returns across seeds, aligned by episode index
            std::map<int, std::vector<double>> by_episode;
            std::map<int, long> step_of;
            for (const auto& file : fs::directory_iterator(dir)) {
                std::string name = file.path().filename().string();
                if (name.rfind("train", 0) != 0 || file.path().extension() != ".csv") continue;
                std::ifstream in(file.path());
                std::string line;
                std::getline(in, line);
                while (std::getline(in, line)) {
                    std::istringstream ls(line);
                    std::string step, episode, ret;
                    std::getline(ls, step, ',');
                    std::getline(ls, episode, ',');
                    std::getline(ls, ret, ',');
                    int ep = std::stoi(episode);
                    by_episode[ep].push_back(n_score(std::stod(ret), b0->mean, b1->mean));
                    step_of[ep] = std::stol(step);
                }
            }
            for (const auto& [ep, scores] : by_episode) {
                double mean = 0.0, var = 0.0;
                for (double v : scores) mean += v / scores.size();
                for (double v : scores) var += (v - mean) * (v - mean) / scores.size();
                plot << dir << ',' << step_of[ep] << ',' << csv_double(mean) << ','
                     << csv_double(std::sqrt(var / scores.size())) << '\n';
            }
        }
        write_text_file(out / "plot.csv", plot.str());
    }
    return kExitOk;
}

// --- verify ---

int cmd_verify(std::uint64_t seed) {
    std::vector<PropertyResult> results = run_theorem_suite(seed);
    bool all = true;
    for (const PropertyResult& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
        if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
        std::cout << "\n";
        all = all && r.passed;
    }
    return all ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversary-aware policy iteration workbench"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint_path, z0_dir, z1_dir;
    long seed_override = -1;
    int jobs = 1;
    std::vector<std::string> run_dirs;

    CLI::App* train = app.add_subcommand("train", "train a policy from a config");
    train->add_option("--config", config_path, "experiment config JSON")->required();
    train->add_option("--seed", seed_override, "override the config's seed list with one seed");
    train->add_option("--out", out_dir, "output directory");
    train->add_option("--jobs", jobs, "parallel seeds");

    CLI::App* attack = app.add_subcommand("attack", "evaluate a checkpoint under attacks");
    attack->add_option("--config", config_path, "experiment config JSON")->required();
    attack->add_option("--checkpoint", checkpoint_path, "checkpoint to attack")->required();
    attack->add_option("--out", out_dir, "output directory");
    attack->add_option("--jobs", jobs, "parallel evaluation");

    CLI::App* report = app.add_subcommand("report", "aggregate runs into n-score tables");
    report->add_option("dirs", run_dirs, "run directories");
    report->add_option("--z0", z0_dir, "weak baseline run directory")->required();
    report->add_option("--z1", z1_dir, "strong baseline run directory")->required();
    report->add_option("--out", out_dir, "output directory");

    CLI::App* verify = app.add_subcommand("verify", "run the tabular theorem property suites");
    verify->add_option("--seed", seed_override, "suite seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(config_path, out_dir, seed_override, jobs);
        if (attack->parsed()) return cmd_attack(config_path, checkpoint_path, out_dir, jobs);
        if (report->parsed()) return cmd_report(run_dirs, z0_dir, z1_dir, out_dir);
        if (verify->parsed())
            return cmd_verify(seed_override >= 0 ? static_cast<std::uint64_t>(seed_override) : 0);
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNonConvergence;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitOk;
}
