#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "aapi/attacks.hpp"
#include "aapi/double_integrator.hpp"
#include "aapi/gridworld.hpp"
#include "aapi/maze2d.hpp"
#include "aapi/ppo.hpp"
#include "aapi/td3.hpp"

namespace aapi {

inline void require_object(const nlohmann::json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

/// Strict key check so typos fail loudly instead of silently using defaults.
inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& path) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(path + ": unknown key '" + it.key() + "'");
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
    }
}

struct EnvBlock {
    std::string id;
    // hazard gridworld knobs
    int n = 3;
    double hazard_penalty = -50.0;
    double epsilon = 1.0;
    double gamma = 0.95;
    // maze knob
    std::string layout;
};

struct AttackEntry {
    AttackSpec spec;
    std::string critic_source = "trained-in-bench";  // or "supplied"
    std::string critic_checkpoint;
    long critic_steps = 20000;
};

struct RunBlock {
    std::vector<std::uint64_t> seeds = {0};
    std::string out;
    int episodes = 10;
};

struct ExperimentConfig {
    EnvBlock env;
    std::string algorithm;  // oapi | pi | oa_td3 | td3 | oa_ppo | ppo
    Td3Config td3;
    PpoConfig ppo;
    double tol = 1e-10;
    std::vector<AttackEntry> attacks;
    RunBlock run;
    nlohmann::json resolved;  // the config with defaults filled in

    bool tabular() const { return algorithm == "oapi" || algorithm == "pi"; }
    bool td3_family() const { return algorithm == "oa_td3" || algorithm == "td3"; }
    bool ppo_family() const { return algorithm == "oa_ppo" || algorithm == "ppo"; }
};

inline EnvBlock parse_env_block(const nlohmann::json& j) {
    require_object(j, "env");
    reject_unknown_keys(j, {"id", "n", "hazard_penalty", "epsilon", "gamma", "layout"}, "env");
    EnvBlock env;
    if (!j.contains("id")) throw ConfigError("env: missing 'id'");
    env.id = j.at("id").get<std::string>();
    if (env.id != "double_integrator" && env.id != "maze2d" && env.id != "hazard_gridworld")
        throw ConfigError("env: unknown id '" + env.id + "'");
    env.n = get_or(j, "n", env.n);
    env.hazard_penalty = get_or(j, "hazard_penalty", env.hazard_penalty);
    env.epsilon = get_or(j, "epsilon", env.epsilon);
    env.gamma = get_or(j, "gamma", env.gamma);
    env.layout = get_or(j, "layout", env.layout);
    return env;
}

inline Td3Config parse_td3_block(const nlohmann::json& j, bool oa) {
    reject_unknown_keys(j,
                        {"name", "epsilon", "omega", "pgd_steps", "pgd_step_size", "gamma", "tau",
                         "batch_size", "policy_delay", "exploration_noise", "smoothing_noise",
                         "smoothing_clip", "learning_starts", "total_steps", "gradient_surgery",
                         "lr", "buffer_capacity", "hidden"},
                        "algorithm");
    Td3Config cfg;
    cfg.epsilon = get_or(j, "epsilon", cfg.epsilon);
    cfg.omega = get_or(j, "omega", cfg.omega);
    cfg.pgd_steps = get_or(j, "pgd_steps", cfg.pgd_steps);
    cfg.pgd_step_size = get_or(j, "pgd_step_size", cfg.pgd_step_size);
    cfg.gamma = get_or(j, "gamma", cfg.gamma);
    cfg.tau = get_or(j, "tau", cfg.tau);
    cfg.batch_size = get_or(j, "batch_size", cfg.batch_size);
    cfg.policy_delay = get_or(j, "policy_delay", cfg.policy_delay);
    cfg.exploration_noise = get_or(j, "exploration_noise", cfg.exploration_noise);
    cfg.smoothing_noise = get_or(j, "smoothing_noise", cfg.smoothing_noise);
    cfg.smoothing_clip = get_or(j, "smoothing_clip", cfg.smoothing_clip);
    cfg.learning_starts = get_or(j, "learning_starts", cfg.learning_starts);
    cfg.total_steps = get_or(j, "total_steps", cfg.total_steps);
    cfg.gradient_surgery = get_or(j, "gradient_surgery", cfg.gradient_surgery);
    cfg.lr = get_or(j, "lr", cfg.lr);
    cfg.buffer_capacity = get_or<std::size_t>(j, "buffer_capacity", cfg.buffer_capacity);
    cfg.hidden = get_or(j, "hidden", cfg.hidden);
    if (!oa) {
        cfg.train_oa = false;
        cfg.omega = 1.0;
        cfg.epsilon = 0.0;
    }
    cfg.validate();
    return cfg;
}

inline PpoConfig parse_ppo_block(const nlohmann::json& j, bool oa) {
    reject_unknown_keys(j,
                        {"name", "epsilon", "omega", "gamma", "gae_lambda", "rollout_steps",
                         "minibatches", "update_epochs", "surrogate_clip", "grad_norm_clip", "lr",
                         "lr_decay", "pgd_steps", "pgd_step_size", "total_steps", "hidden"},
                        "algorithm");
    PpoConfig cfg;
    cfg.epsilon = get_or(j, "epsilon", cfg.epsilon);
    cfg.omega = get_or(j, "omega", cfg.omega);
    cfg.gamma = get_or(j, "gamma", cfg.gamma);
    cfg.gae_lambda = get_or(j, "gae_lambda", cfg.gae_lambda);
    cfg.rollout_steps = get_or(j, "rollout_steps", cfg.rollout_steps);
    cfg.minibatches = get_or(j, "minibatches", cfg.minibatches);
    cfg.update_epochs = get_or(j, "update_epochs", cfg.update_epochs);
    cfg.surrogate_clip = get_or(j, "surrogate_clip", cfg.surrogate_clip);
    cfg.grad_norm_clip = get_or(j, "grad_norm_clip", cfg.grad_norm_clip);
    cfg.lr = get_or(j, "lr", cfg.lr);
    cfg.lr_decay = get_or(j, "lr_decay", cfg.lr_decay);
    cfg.pgd_steps = get_or(j, "pgd_steps", cfg.pgd_steps);
    cfg.pgd_step_size = get_or(j, "pgd_step_size", cfg.pgd_step_size);
    cfg.total_steps = get_or<long>(j, "total_steps", cfg.total_steps);
    cfg.hidden = get_or(j, "hidden", cfg.hidden);
    if (!oa) {
        cfg.train_oa = false;
        cfg.omega = 1.0;
        cfg.epsilon = 0.0;
    }
    cfg.validate();
    return cfg;
}

inline AttackEntry parse_attack_entry(const nlohmann::json& j, int index) {
    std::string path = "attack[" + std::to_string(index) + "]";
    require_object(j, path);
    reject_unknown_keys(
        j, {"kind", "epsilon", "pgd_steps", "critic_source", "critic_checkpoint", "critic_steps"},
        path);
    AttackEntry entry;
    if (!j.contains("kind")) throw ConfigError(path + ": missing 'kind'");
    entry.spec.kind = attack_kind_from_name(j.at("kind").get<std::string>());
    entry.spec.epsilon = get_or(j, "epsilon", 0.0);
    entry.spec.pgd_steps = get_or(j, "pgd_steps", 30);
    entry.critic_source = get_or<std::string>(j, "critic_source", entry.critic_source);
    entry.critic_checkpoint = get_or<std::string>(j, "critic_checkpoint", entry.critic_checkpoint);
    entry.critic_steps = get_or<long>(j, "critic_steps", entry.critic_steps);
    if (entry.critic_source != "trained-in-bench" && entry.critic_source != "supplied")
        throw ConfigError(path + ": critic_source must be trained-in-bench or supplied");
    if (entry.critic_source == "supplied" && entry.critic_checkpoint.empty())
        throw ConfigError(path + ": supplied critic_source needs critic_checkpoint");
    entry.spec.validate();
    return entry;
}

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    require_object(j, "config");
    reject_unknown_keys(j, {"env", "algorithm", "attack", "run"}, "config");
    ExperimentConfig cfg;
    if (!j.contains("env")) throw ConfigError("config: missing 'env'");
    cfg.env = parse_env_block(j.at("env"));

    if (j.contains("algorithm")) {
        const nlohmann::json& a = j.at("algorithm");
        require_object(a, "algorithm");
        if (!a.contains("name")) throw ConfigError("algorithm: missing 'name'");
        cfg.algorithm = a.at("name").get<std::string>();
        if (cfg.tabular()) {
            reject_unknown_keys(a, {"name", "tol"}, "algorithm");
            cfg.tol = get_or(a, "tol", cfg.tol);
            if (cfg.tol <= 0.0) throw ConfigError("algorithm: tol must be positive");
            if (cfg.env.id != "hazard_gridworld")
                throw ConfigError("algorithm: " + cfg.algorithm + " needs env id hazard_gridworld");
        } else if (cfg.td3_family()) {
            cfg.td3 = parse_td3_block(a, cfg.algorithm == "oa_td3");
            if (cfg.env.id == "hazard_gridworld")
                throw ConfigError("algorithm: " + cfg.algorithm + " needs a continuous env");
        } else if (cfg.ppo_family()) {
            cfg.ppo = parse_ppo_block(a, cfg.algorithm == "oa_ppo");
            if (cfg.env.id == "hazard_gridworld")
                throw ConfigError("algorithm: " + cfg.algorithm + " needs a continuous env");
        } else {
            throw ConfigError("algorithm: unknown name '" + cfg.algorithm + "'");
        }
    }

    if (j.contains("attack")) {
        const nlohmann::json& arr = j.at("attack");
        if (!arr.is_array()) throw ConfigError("attack: expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i)
            cfg.attacks.push_back(parse_attack_entry(arr[i], static_cast<int>(i)));
    }

    if (j.contains("run")) {
        const nlohmann::json& r = j.at("run");
        require_object(r, "run");
        reject_unknown_keys(r, {"seeds", "out", "episodes"}, "run");
        cfg.run.seeds = get_or(r, "seeds", cfg.run.seeds);
        cfg.run.out = get_or(r, "out", cfg.run.out);
        cfg.run.episodes = get_or(r, "episodes", cfg.run.episodes);
        if (cfg.run.seeds.empty()) throw ConfigError("run: seeds must be non-empty");
        if (cfg.run.episodes < 1) throw ConfigError("run: episodes must be >= 1");
    }

    // resolved copy: every default made explicit
    nlohmann::json out;
    out["env"] = {{"id", cfg.env.id}};
    if (cfg.env.id == "hazard_gridworld") {
        out["env"]["n"] = cfg.env.n;
        out["env"]["hazard_penalty"] = cfg.env.hazard_penalty;
        out["env"]["epsilon"] = cfg.env.epsilon;
        out["env"]["gamma"] = cfg.env.gamma;
    }
    if (cfg.env.id == "maze2d" && !cfg.env.layout.empty()) out["env"]["layout"] = cfg.env.layout;
    if (!cfg.algorithm.empty()) {
        nlohmann::json a{{"name", cfg.algorithm}};
        if (cfg.tabular()) {
            a["tol"] = cfg.tol;
        } else if (cfg.td3_family()) {
            const Td3Config& t = cfg.td3;
            a["epsilon"] = t.epsilon;
            a["omega"] = t.omega;
            a["pgd_steps"] = t.pgd_steps;
            a["pgd_step_size"] = t.pgd_step_size;
            a["gamma"] = t.gamma;
            a["tau"] = t.tau;
            a["batch_size"] = t.batch_size;
            a["policy_delay"] = t.policy_delay;
            a["exploration_noise"] = t.exploration_noise;
            a["smoothing_noise"] = t.smoothing_noise;
            a["smoothing_clip"] = t.smoothing_clip;
            a["learning_starts"] = t.learning_starts;
            a["total_steps"] = t.total_steps;
            a["gradient_surgery"] = t.gradient_surgery;
            a["lr"] = t.lr;
            a["buffer_capacity"] = t.buffer_capacity;
            a["hidden"] = t.hidden;
        } else {
            const PpoConfig& p = cfg.ppo;
            a["epsilon"] = p.epsilon;
            a["omega"] = p.omega;
            a["gamma"] = p.gamma;
            a["gae_lambda"] = p.gae_lambda;
            a["rollout_steps"] = p.rollout_steps;
            a["minibatches"] = p.minibatches;
            a["update_epochs"] = p.update_epochs;
            a["surrogate_clip"] = p.surrogate_clip;
            a["grad_norm_clip"] = p.grad_norm_clip;
            a["lr"] = p.lr;
            a["lr_decay"] = p.lr_decay;
            a["pgd_steps"] = p.pgd_steps;
            a["pgd_step_size"] = p.pgd_step_size;
            a["total_steps"] = p.total_steps;
            a["hidden"] = p.hidden;
        }
        out["algorithm"] = a;
    }
    if (!cfg.attacks.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (const AttackEntry& e : cfg.attacks) {
            nlohmann::json a{{"kind", attack_kind_name(e.spec.kind)},
                             {"epsilon", e.spec.epsilon},
                             {"pgd_steps", e.spec.pgd_steps},
                             {"critic_source", e.critic_source},
                             {"critic_steps", e.critic_steps}};
            if (!e.critic_checkpoint.empty()) a["critic_checkpoint"] = e.critic_checkpoint;
            arr.push_back(a);
        }
        out["attack"] = arr;
    }
    out["run"] = {{"seeds", cfg.run.seeds}, {"episodes", cfg.run.episodes}};
    if (!cfg.run.out.empty()) out["run"]["out"] = cfg.run.out;
    cfg.resolved = out;
    return cfg;
}

inline std::unique_ptr<Env> make_continuous_env(const EnvBlock& env) {
    if (env.id == "double_integrator") return std::make_unique<DoubleIntegratorEnv>();
    if (env.id == "maze2d") {
        if (env.layout.empty()) return std::make_unique<Maze2dEnv>();
        return std::make_unique<Maze2dEnv>(parse_maze_layout(env.layout));
    }
    throw ConfigError("env id '" + env.id + "' is not a continuous environment");
}

// --- Checkpoints ---

constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    int format_version = kCheckpointVersion;
    std::string algorithm;
    std::string env_id;
    double epsilon = 0.0;
    double omega = 1.0;
    std::uint64_t seed = 0;
    long step = 0;

    bool has_nets = false;
    DenseNet actor;
    DenseNet critic1, critic2, oa_critic;
    bool has_twin = false, has_oa = false;
    std::vector<double> log_std;  // ppo policies only

    bool has_tabular = false;
    int n_states = 0, n_actions = 0;
    std::vector<int> policy_actions;
    std::vector<double> q_values;
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& c) {
    nlohmann::json j;
    j["format_version"] = c.format_version;
    j["algorithm"] = c.algorithm;
    j["env_id"] = c.env_id;
    j["epsilon"] = c.epsilon;
    j["omega"] = c.omega;
    j["seed"] = c.seed;
    j["step"] = c.step;
    if (c.has_nets) {
        j["actor"] = net_to_json(c.actor);
        if (c.has_twin) {
            j["critic1"] = net_to_json(c.critic1);
            j["critic2"] = net_to_json(c.critic2);
        }
        if (c.has_oa) j["oa_critic"] = net_to_json(c.oa_critic);
        if (!c.log_std.empty()) j["log_std"] = c.log_std;
    }
    if (c.has_tabular) {
        j["n_states"] = c.n_states;
        j["n_actions"] = c.n_actions;
        j["policy_actions"] = c.policy_actions;
        j["q_values"] = c.q_values;
    }
    return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    Checkpoint c;
    try {
        c.format_version = j.at("format_version").get<int>();
        if (c.format_version != kCheckpointVersion)
            throw ConfigError("checkpoint: unsupported format version " +
                              std::to_string(c.format_version));
        c.algorithm = j.at("algorithm").get<std::string>();
        c.env_id = j.at("env_id").get<std::string>();
        c.epsilon = j.at("epsilon").get<double>();
        c.omega = j.at("omega").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.step = j.at("step").get<long>();
        if (j.contains("actor")) {
            c.has_nets = true;
            c.actor = net_from_json(j.at("actor"));
            if (j.contains("critic1")) {
                c.has_twin = true;
                c.critic1 = net_from_json(j.at("critic1"));
                c.critic2 = net_from_json(j.at("critic2"));
            }
            if (j.contains("oa_critic")) {
                c.has_oa = true;
                c.oa_critic = net_from_json(j.at("oa_critic"));
            }
            if (j.contains("log_std")) c.log_std = j.at("log_std").get<std::vector<double>>();
        }
        if (j.contains("policy_actions")) {
            c.has_tabular = true;
            c.n_states = j.at("n_states").get<int>();
            c.n_actions = j.at("n_actions").get<int>();
            c.policy_actions = j.at("policy_actions").get<std::vector<int>>();
            c.q_values = j.at("q_values").get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint: ") + e.what());
    }
    return c;
}

}  // namespace aapi
