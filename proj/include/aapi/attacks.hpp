#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "aapi/env.hpp"
#include "aapi/oapi.hpp"
#include "aapi/pgd.hpp"
#include "aapi/replay.hpp"
#include "aapi/td3.hpp"

namespace aapi {

enum class AttackKind { Nominal, Random, Biggest, MinQ, MinOaQ };

inline std::string attack_kind_name(AttackKind k) {
    switch (k) {
        case AttackKind::Nominal: return "nominal";
        case AttackKind::Random: return "random";
        case AttackKind::Biggest: return "biggest";
        case AttackKind::MinQ: return "min_q";
        case AttackKind::MinOaQ: return "min_oa_q";
    }
    return "nominal";
}

inline AttackKind attack_kind_from_name(const std::string& s) {
    if (s == "nominal") return AttackKind::Nominal;
    if (s == "random") return AttackKind::Random;
    if (s == "biggest") return AttackKind::Biggest;
    if (s == "min_q") return AttackKind::MinQ;
    if (s == "min_oa_q") return AttackKind::MinOaQ;
    throw ConfigError("unknown attack kind '" + s + "'");
}

struct AttackSpec {
    AttackKind kind = AttackKind::Nominal;
    double epsilon = 0.0;
    int pgd_steps = 30;

    bool needs_critic() const { return kind == AttackKind::MinQ || kind == AttackKind::MinOaQ; }
    void validate() const {
        if (epsilon < 0.0) throw ConfigError("attack: epsilon must be >= 0");
        if (needs_critic() && pgd_steps < 1) throw ConfigError("attack: pgd_steps must be >= 1");
    }
};

/// Per-step action perturbation. The nominal action must already be in the
/// box; the executed action is clipped back into it.
inline std::vector<double> perturb(const AttackSpec& attack, const std::vector<double>& s,
                                   const std::vector<double>& a, std::mt19937_64& rng,
                                   const DenseNet* critic = nullptr) {
    attack.validate();
    const int ad = static_cast<int>(a.size());
    switch (attack.kind) {
        case AttackKind::Nominal:
            return a;
        case AttackKind::Random: {
            std::uniform_real_distribution<double> u(-attack.epsilon, attack.epsilon);
            std::vector<double> out(ad);
            for (int j = 0; j < ad; ++j) out[j] = clamp(a[j] + u(rng), -1.0, 1.0);
            return out;
        }
        case AttackKind::Biggest: {
            std::vector<double> out(ad);
            for (int j = 0; j < ad; ++j) {
                double sign = rng() % 2 == 0 ? 1.0 : -1.0;
                out[j] = clamp(a[j] + sign * attack.epsilon, -1.0, 1.0);
            }
            return out;
        }
        case AttackKind::MinQ:
        case AttackKind::MinOaQ: {
            if (!critic)
                throw ConfigError("attack: " + attack_kind_name(attack.kind) + " needs a critic");
            std::vector<double> delta = pgd_min_delta(*critic, s, a, attack.epsilon,
                                                      attack.pgd_steps,
                                                      attack.epsilon / attack.pgd_steps);
            std::vector<double> out(ad);
            for (int j = 0; j < ad; ++j) out[j] = clamp(a[j] + delta[j], -1.0, 1.0);
            return out;
        }
    }
    return a;
}

enum class AttackCriticMode { Standard, Oa };

struct AttackCriticConfig {
    double gamma = 0.99;
    double tau = 0.005;
    double lr = 3e-4;
    int batch_size = 64;
    int pgd_steps = 16;
    double pgd_step_size = 0.0;
    double exploration_noise = 0.1;
    double smoothing_noise = 0.2;
    double smoothing_clip = 0.5;
    long warmup_steps = 1000;
    long total_steps = 20000;
    std::uint64_t seed = 0;
    std::vector<int> hidden = {64, 64};
    std::size_t buffer_capacity = 100000;

    double pgd_eta(double eps) const {
        if (pgd_step_size > 0.0) return pgd_step_size;
        return pgd_steps > 0 ? eps / pgd_steps : 0.0;
    }
};

/// Trains a standalone critic for a frozen deterministic policy. Oa mode
/// explores with the current worst-case perturbation and regresses on
/// worst-case targets; Standard mode explores with Gaussian noise and uses
/// unperturbed targets, giving the plain action-value function.
inline DenseNet train_attack_critic(const DenseNet& actor, Env& env, double eps,
                                    AttackCriticMode mode, const AttackCriticConfig& cfg) {
    if (eps < 0.0) throw ConfigError("attack critic: eps must be >= 0");
    const int sd = env.obs_dim(), ad = env.act_dim();
    auto rng_init = rng_stream(cfg.seed, 0xcc01);
    auto rng_explore = rng_stream(cfg.seed, 0xcc02);
    auto rng_batch = rng_stream(cfg.seed, 0xcc03);
    auto rng_smooth = rng_stream(cfg.seed, 0xcc04);
    auto rng_env = rng_stream(cfg.seed, 0xcc05);

    DenseNet critic = detail::make_critic(sd, ad, cfg.hidden, rng_init);
    DenseNet critic_t = critic;
    AdamState opt = AdamState::make(critic.params.size(), cfg.lr, "attack_critic");
    ReplayBuffer buffer(cfg.buffer_capacity);
    std::normal_distribution<double> expl(0.0, cfg.exploration_noise);
    std::normal_distribution<double> smooth(0.0, cfg.smoothing_noise);

    const double target_eps = mode == AttackCriticMode::Oa ? eps : 0.0;
    std::vector<double> obs = env.reset(rng_env());
    int ep_steps = 0;
    for (long step = 1; step <= cfg.total_steps; ++step) {
        Tensor mu = forward(actor, Tensor({sd}, obs));
        std::vector<double> action(ad);
        if (step <= cfg.warmup_steps || mode == AttackCriticMode::Standard) {
            for (int j = 0; j < ad; ++j) action[j] = clamp(mu[j] + expl(rng_explore), -1.0, 1.0);
        } else {
            std::vector<double> delta = pgd_min_delta(critic, obs, mu.data, eps, cfg.pgd_steps,
                                                      cfg.pgd_eta(eps));
            for (int j = 0; j < ad; ++j) action[j] = clamp(mu[j] + delta[j], -1.0, 1.0);
        }
        StepResult sr = env.step(action);
        ++ep_steps;
        bool terminal = sr.done && ep_steps < env.max_episode_steps();
        buffer.push({obs, action, sr.reward, sr.obs, terminal});
        obs = sr.obs;
        if (sr.done) {
            obs = env.reset(rng_env());
            ep_steps = 0;
        }

        if (step > cfg.warmup_steps && buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
            auto idx = buffer.sample_indices(cfg.batch_size, rng_batch);
            const int n = cfg.batch_size;
            std::vector<std::vector<double>> bs(n), ba(n), bs2(n), a_next(n, std::vector<double>(ad));
            std::vector<double> br(n), y(n);
            std::vector<bool> bd(n);
            for (int i = 0; i < n; ++i) {
                const Transition& t = buffer[idx[i]];
                bs[i] = t.s;
                ba[i] = t.a;
                bs2[i] = t.s_next;
                br[i] = t.r;
                bd[i] = t.done;
            }
            Tensor in({n, sd});
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < sd; ++j) in.data[static_cast<std::size_t>(i) * sd + j] = bs2[i][j];
            Tensor mu2 = forward(actor, in);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < ad; ++j) {
                    double noise = clamp(smooth(rng_smooth), -cfg.smoothing_clip, cfg.smoothing_clip);
                    a_next[i][j] = clamp(mu2.data[static_cast<std::size_t>(i) * ad + j] + noise, -1.0, 1.0);
                }
            std::vector<std::vector<double>> a_eval = a_next;
            if (target_eps > 0.0) {
                auto delta = pgd_min_delta_batch(critic_t, bs2, a_next, target_eps, cfg.pgd_steps,
                                                 cfg.pgd_eta(target_eps));
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < ad; ++j)
                        a_eval[i][j] = clamp(a_next[i][j] + delta[i][j], -1.0, 1.0);
            }
            Tensor qn = forward(critic_t, detail::concat_rows(bs2, a_eval));
            for (int i = 0; i < n; ++i) y[i] = br[i] + cfg.gamma * (bd[i] ? 0.0 : 1.0) * qn[i];
            double loss = detail::critic_regress(critic, opt, detail::concat_rows(bs, ba), y);
            if (!std::isfinite(loss))
                throw NumericError("attack critic: non-finite loss at step " + std::to_string(step));
            detail::soft_update(critic_t, critic, cfg.tau);
        }
    }
    return critic;
}

struct EvalReport {
    std::vector<double> returns;  // seed-major, episode order within seed
    double mean = 0.0;
    double stderr_ = 0.0;
    int n = 0;
    std::vector<std::uint64_t> seeds;
    AttackSpec attack;
};

/// Rolls out the frozen policy under the attack: the policy always sees the
/// true state, only its executed action is perturbed.
inline EvalReport evaluate(const DenseNet& actor, Env& env, const AttackSpec& attack, int episodes,
                           std::vector<std::uint64_t> seeds, const DenseNet* critic = nullptr) {
    attack.validate();
    if (episodes < 1) throw ConfigError("evaluate: need at least one episode");
    if (seeds.empty()) throw ConfigError("evaluate: need at least one seed");
    if (attack.needs_critic() && !critic)
        throw ConfigError("evaluate: " + attack_kind_name(attack.kind) + " needs a critic");
    std::sort(seeds.begin(), seeds.end());
    const int sd = env.obs_dim(), ad = env.act_dim();
    EvalReport rep;
    rep.attack = attack;
    rep.seeds = seeds;
    for (std::uint64_t seed : seeds) {
        auto rng_env = rng_stream(seed, 0xee01);
        auto rng_attack = rng_stream(seed, 0xee02);
        for (int ep = 0; ep < episodes; ++ep) {
            std::vector<double> obs = env.reset(rng_env());
            double ret = 0.0;
            bool done = false;
            while (!done) {
                Tensor mu = forward(actor, Tensor({sd}, obs));
                std::vector<double> a = clip_action(mu.data, ad);
                StepResult sr = env.step(perturb(attack, obs, a, rng_attack, critic));
                ret += sr.reward;
                obs = sr.obs;
                done = sr.done;
            }
            rep.returns.push_back(ret);
        }
    }
    rep.n = static_cast<int>(rep.returns.size());
    for (double r : rep.returns) rep.mean += r / rep.n;
    if (!std::isfinite(rep.mean)) throw NumericError("evaluate: non-finite mean return");
    if (rep.n > 1) {
        double var = 0.0;
        for (double r : rep.returns) var += (r - rep.mean) * (r - rep.mean) / (rep.n - 1);
        rep.stderr_ = std::sqrt(var / rep.n);
    }
    return rep;
}

/// Normalized score of a result z against a weak baseline z0 and a strong
/// baseline z1.
inline double n_score(double z, double z0, double z1) {
    if (z1 == z0) throw ConfigError("n_score: degenerate baselines (z1 == z0)");
    return (z - z0) / (z1 - z0);
}

// --- Exact tabular attack evaluation ---

/// The stochastic policy actually executed when the given attack hits a
/// deterministic tabular policy; random/biggest average over their draw
/// distributions, gradient attacks pick the exact per-state argmin.
inline TabularPolicy attacked_tabular_policy(const FiniteAAMdp& mdp, const TabularPolicy& pi,
                                             AttackKind kind, double tol = 1e-10) {
    check_dims(pi, mdp);
    if (!pi.deterministic)
        throw ConfigError("tabular attack: expected a deterministic policy");
    const int S = mdp.n_states, A = mdp.n_actions();
    if (kind == AttackKind::Nominal) return pi;
    if (kind == AttackKind::Random || kind == AttackKind::Biggest) {
        std::vector<double> probs(static_cast<std::size_t>(S) * A, 0.0);
        for (int s = 0; s < S; ++s) {
            const std::vector<int>& hood = mdp.neighborhoods[pi.action[s]];
            std::vector<int> support;
            if (kind == AttackKind::Random) {
                support = hood;
            } else {
                double dmax = 0.0;
                for (int b : hood) dmax = std::max(dmax, mdp.embed_dist(pi.action[s], b));
                for (int b : hood)
                    if (mdp.embed_dist(pi.action[s], b) >= dmax - kNeighborTol) support.push_back(b);
            }
            for (int b : support)
                probs[static_cast<std::size_t>(s) * A + b] += 1.0 / support.size();
        }
        return TabularPolicy::make_stochastic(S, A, std::move(probs));
    }
    // gradient attacks: exact argmin over the neighborhood, lowest index on ties
    QTable q = kind == AttackKind::MinQ ? policy_evaluation(pi, mdp, tol)
                                        : oa_policy_evaluation(pi, mdp, tol).q_adv;
    std::vector<int> exec(S);
    for (int s = 0; s < S; ++s) {
        int best = pi.action[s];
        double best_q = q(s, best);
        for (int b : mdp.neighborhoods[pi.action[s]])
            if (q(s, b) < best_q) {
                best_q = q(s, b);
                best = b;
            }
        exec[s] = best;
    }
    return TabularPolicy::make_deterministic(std::move(exec), A);
}

/// Exact rho-weighted value of the policy under the attack, via evaluation
/// of the induced executed-action Markov chain.
inline double tabular_attack_value(const FiniteAAMdp& mdp, const TabularPolicy& pi, AttackKind kind,
                                   double tol = 1e-10) {
    TabularPolicy executed = attacked_tabular_policy(mdp, pi, kind, tol);
    QTable q = policy_evaluation(executed, mdp, tol);
    return rho_objective(state_values(q, executed), mdp);
}

}  // namespace aapi
