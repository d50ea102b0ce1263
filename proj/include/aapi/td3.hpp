#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "aapi/env.hpp"
#include "aapi/net.hpp"
#include "aapi/pgd.hpp"
#include "aapi/replay.hpp"
#include "aapi/surgery.hpp"

namespace aapi {

struct Td3Config {
    double epsilon = 0.0;          // adversary strength
    double omega = 1.0;            // weight on the nominal objective
    int pgd_steps = 16;
    double pgd_step_size = 0.0;    // 0 resolves to epsilon / pgd_steps
    double gamma = 0.99;
    double tau = 0.005;
    int batch_size = 64;
    int policy_delay = 2;
    double exploration_noise = 0.1;
    double smoothing_noise = 0.2;
    double smoothing_clip = 0.5;
    long learning_starts = 1000;
    long total_steps = 30000;
    std::uint64_t seed = 0;
    bool gradient_surgery = true;
    bool train_oa = true;          // off gives the plain twin-critic baseline
    double lr = 3e-4;
    std::size_t buffer_capacity = 100000;
    std::vector<int> hidden = {64, 64};

    double pgd_eta() const {
        if (pgd_step_size > 0.0) return pgd_step_size;
        return pgd_steps > 0 ? epsilon / pgd_steps : 0.0;
    }
    void validate() const {
        if (epsilon < 0.0) throw ConfigError("td3 config: epsilon must be >= 0");
        if (omega < 0.0 || omega > 1.0) throw ConfigError("td3 config: omega outside [0,1]");
        if (tau <= 0.0 || tau > 1.0) throw ConfigError("td3 config: tau outside (0,1]");
        if (pgd_steps < 1) throw ConfigError("td3 config: pgd_steps must be >= 1");
        if (batch_size < 1 || policy_delay < 1) throw ConfigError("td3 config: bad batch/delay");
        if (total_steps < 1 || learning_starts < 0) throw ConfigError("td3 config: bad step counts");
        if (hidden.empty()) throw ConfigError("td3 config: need at least one hidden layer");
    }
};

struct Td3LogRow {
    long step = 0;
    int episode = 0;
    double nominal_return = 0.0;
    double critic_loss = 0.0;
    double oa_critic_loss = 0.0;
    double conflict_rate = 0.0;
};

struct Td3Result {
    DenseNet actor;
    DenseNet critic1, critic2;
    DenseNet oa_critic;
    std::vector<Td3LogRow> log;
};

namespace detail {

inline DenseNet make_actor(int obs, int act, const std::vector<int>& hidden, std::mt19937_64& rng) {
    std::vector<int> sizes{obs};
    std::vector<Activation> acts;
    for (int h : hidden) {
        sizes.push_back(h);
        acts.push_back(Activation::Relu);
    }
    sizes.push_back(act);
    acts.push_back(Activation::Tanh);
    DenseNet net = DenseNet::make(sizes, acts);
    net.init(rng);
    return net;
}

inline DenseNet make_critic(int obs, int act, const std::vector<int>& hidden, std::mt19937_64& rng) {
    std::vector<int> sizes{obs + act};
    std::vector<Activation> acts;
    for (int h : hidden) {
        sizes.push_back(h);
        acts.push_back(Activation::Relu);
    }
    sizes.push_back(1);
    acts.push_back(Activation::Identity);
    DenseNet net = DenseNet::make(sizes, acts);
    net.init(rng);
    return net;
}

inline void soft_update(DenseNet& target, const DenseNet& online, double tau) {
    for (std::size_t i = 0; i < target.params.size(); ++i)
        target.params[i] += tau * (online.params[i] - target.params[i]);
}

inline Tensor concat_rows(const std::vector<std::vector<double>>& a,
                          const std::vector<std::vector<double>>& b) {
    const int n = static_cast<int>(a.size());
    const int da = static_cast<int>(a[0].size()), db = static_cast<int>(b[0].size());
    Tensor x({n, da + db});
    for (int i = 0; i < n; ++i) {
        double* row = &x.data[static_cast<std::size_t>(i) * (da + db)];
        for (int j = 0; j < da; ++j) row[j] = a[i][j];
        for (int j = 0; j < db; ++j) row[da + j] = b[i][j];
    }
    return x;
}

/// One MSE regression step of a critic toward fixed targets. Returns the loss.
inline double critic_regress(DenseNet& critic, AdamState& opt, const Tensor& input,
                             const std::vector<double>& target) {
    const int n = input.shape[0];
    Tape tape;
    Tensor q = forward(critic, input, &tape);
    double loss = 0.0;
    Tensor up({n, 1});
    for (int i = 0; i < n; ++i) {
        double err = q[i] - target[i];
        loss += err * err / n;
        up[i] = 2.0 * err / n;
    }
    Gradients g = backward(critic, tape, up);
    adam_step(critic.params, g.params, opt);
    return loss;
}

/// Gradient of -mean(critic(s, mu(s) + delta)) with respect to the actor
/// parameters; delta rows are treated as constants and the executed action
/// is clipped to the box (clipped coordinates pass no gradient).
inline std::vector<double> actor_objective_grad(const DenseNet& actor, const DenseNet& critic,
                                                const std::vector<std::vector<double>>& s,
                                                const std::vector<std::vector<double>>& mu,
                                                const std::vector<std::vector<double>>* delta) {
    const int n = static_cast<int>(s.size());
    const int ad = static_cast<int>(mu[0].size());
    std::vector<std::vector<double>> executed = mu;
    if (delta)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < ad; ++j) executed[i][j] = clamp(mu[i][j] + (*delta)[i][j], -1.0, 1.0);
    Tape ctape;
    forward(critic, concat_rows(s, executed), &ctape);
    Tensor up({n, 1});
    for (int i = 0; i < n; ++i) up[i] = -1.0 / n;
    Gradients cg = backward(critic, ctape, up, /*want_params=*/false);

    const int sd = static_cast<int>(s[0].size());
    Tensor actor_up({n, ad});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < ad; ++j) {
            bool clipped = delta && executed[i][j] != mu[i][j] + (*delta)[i][j];
            actor_up.data[static_cast<std::size_t>(i) * ad + j] =
                clipped ? 0.0 : cg.input.data[static_cast<std::size_t>(i) * (sd + ad) + sd + j];
        }
    Tape atape;
    Tensor in({n, sd});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < sd; ++j) in.data[static_cast<std::size_t>(i) * sd + j] = s[i][j];
    forward(actor, in, &atape);
    return backward(actor, atape, actor_up).params;
}

}  // namespace detail

/// Regression targets for one sampled batch: the twin-critic target y and the
/// worst-case target y_adv built from a signed-gradient search against the
/// target robustness critic.
inline std::pair<std::vector<double>, std::vector<double>> td3_targets(
    const std::vector<std::vector<double>>& s_next, const std::vector<double>& r,
    const std::vector<bool>& done, const DenseNet& actor_t, const DenseNet& critic1_t,
    const DenseNet& critic2_t, const DenseNet& oa_critic_t, const Td3Config& cfg,
    std::mt19937_64& noise_rng) {
    const int n = static_cast<int>(s_next.size());
    const int sd = static_cast<int>(s_next[0].size());
    const int ad = actor_t.output_size();
    Tensor in({n, sd});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < sd; ++j) in.data[static_cast<std::size_t>(i) * sd + j] = s_next[i][j];
    Tensor mu = forward(actor_t, in);
    std::normal_distribution<double> gauss(0.0, cfg.smoothing_noise);
    std::vector<std::vector<double>> a_next(n, std::vector<double>(ad));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < ad; ++j) {
            double noise = clamp(gauss(noise_rng), -cfg.smoothing_clip, cfg.smoothing_clip);
            a_next[i][j] = clamp(mu.data[static_cast<std::size_t>(i) * ad + j] + noise, -1.0, 1.0);
        }
    Tensor x = detail::concat_rows(s_next, a_next);
    Tensor q1 = forward(critic1_t, x);
    Tensor q2 = forward(critic2_t, x);
    std::vector<double> y(n), y_adv(n);
    std::vector<std::vector<double>> delta;
    if (cfg.train_oa)
        delta = pgd_min_delta_batch(oa_critic_t, s_next, a_next, cfg.epsilon, cfg.pgd_steps,
                                    cfg.pgd_eta());
    std::vector<std::vector<double>> a_pert = a_next;
    if (cfg.train_oa)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < ad; ++j) a_pert[i][j] = clamp(a_next[i][j] + delta[i][j], -1.0, 1.0);
    Tensor qa = cfg.train_oa ? forward(oa_critic_t, detail::concat_rows(s_next, a_pert)) : Tensor();
    for (int i = 0; i < n; ++i) {
        double nd = done[i] ? 0.0 : 1.0;
        y[i] = r[i] + cfg.gamma * nd * std::min(q1[i], q2[i]);
        y_adv[i] = cfg.train_oa ? r[i] + cfg.gamma * nd * qa[i] : 0.0;
    }
    return {std::move(y), std::move(y_adv)};
}

/// Full training loop: twin critics plus a robustness critic, delayed actor
/// updates combining both objectives, soft target updates. Deterministic for
/// a given config and seed.
inline Td3Result oa_td3_train(Env& env, const Td3Config& cfg) {
    cfg.validate();
    const int sd = env.obs_dim(), ad = env.act_dim();

    auto rng_init_actor = rng_stream(cfg.seed, 0xac01);
    auto rng_init_c1 = rng_stream(cfg.seed, 0xac02);
    auto rng_init_c2 = rng_stream(cfg.seed, 0xac03);
    auto rng_init_oa = rng_stream(cfg.seed, 0xac04);
    auto rng_warmup = rng_stream(cfg.seed, 0xac05);
    auto rng_explore = rng_stream(cfg.seed, 0xac06);
    auto rng_batch = rng_stream(cfg.seed, 0xac07);
    auto rng_smooth = rng_stream(cfg.seed, 0xac08);
    auto rng_env = rng_stream(cfg.seed, 0xac09);

    Td3Result out;
    out.actor = detail::make_actor(sd, ad, cfg.hidden, rng_init_actor);
    out.critic1 = detail::make_critic(sd, ad, cfg.hidden, rng_init_c1);
    out.critic2 = detail::make_critic(sd, ad, cfg.hidden, rng_init_c2);
    out.oa_critic = detail::make_critic(sd, ad, cfg.hidden, rng_init_oa);
    DenseNet actor_t = out.actor, c1_t = out.critic1, c2_t = out.critic2, oa_t = out.oa_critic;

    AdamState opt_actor = AdamState::make(out.actor.params.size(), cfg.lr, "actor");
    AdamState opt_c1 = AdamState::make(out.critic1.params.size(), cfg.lr, "critic1");
    AdamState opt_c2 = AdamState::make(out.critic2.params.size(), cfg.lr, "critic2");
    AdamState opt_oa = AdamState::make(out.oa_critic.params.size(), cfg.lr, "oa_critic");

    ReplayBuffer buffer(cfg.buffer_capacity);
    std::uniform_real_distribution<double> ubox(-1.0, 1.0);
    std::normal_distribution<double> expl(0.0, cfg.exploration_noise);

    std::vector<double> obs = env.reset(rng_env());
    int episode = 0, ep_steps = 0;
    double ep_return = 0.0;
    double last_closs = 0.0, last_oa_loss = 0.0;
    long updates = 0, ep_actor_updates = 0, ep_conflicts = 0;

    for (long step = 1; step <= cfg.total_steps; ++step) {
        std::vector<double> action(ad);
        if (step <= cfg.learning_starts) {
            for (double& x : action) x = ubox(rng_warmup);
        } else {
            Tensor mu = forward(out.actor, Tensor({sd}, obs));
            for (int j = 0; j < ad; ++j) action[j] = clamp(mu[j] + expl(rng_explore), -1.0, 1.0);
        }
        StepResult sr = env.step(action);
        ++ep_steps;
        ep_return += sr.reward;
        // time-limit terminations still bootstrap
        bool terminal = sr.done && ep_steps < env.max_episode_steps();
        buffer.push({obs, action, sr.reward, sr.obs, terminal});
        obs = sr.obs;

        if (step > cfg.learning_starts && buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
            auto idx = buffer.sample_indices(cfg.batch_size, rng_batch);
            const int n = cfg.batch_size;
            std::vector<std::vector<double>> bs(n), ba(n), bs2(n);
            std::vector<double> br(n);
            std::vector<bool> bd(n);
            for (int i = 0; i < n; ++i) {
                const Transition& t = buffer[idx[i]];
                bs[i] = t.s;
                ba[i] = t.a;
                bs2[i] = t.s_next;
                br[i] = t.r;
                bd[i] = t.done;
            }
            auto [y, y_adv] = td3_targets(bs2, br, bd, actor_t, c1_t, c2_t, oa_t, cfg, rng_smooth);
            Tensor x = detail::concat_rows(bs, ba);
            last_closs = detail::critic_regress(out.critic1, opt_c1, x, y) +
                         detail::critic_regress(out.critic2, opt_c2, x, y);
            if (cfg.train_oa) last_oa_loss = detail::critic_regress(out.oa_critic, opt_oa, x, y_adv);
            if (!std::isfinite(last_closs) || !std::isfinite(last_oa_loss))
                throw NumericError("td3: non-finite critic loss at step " + std::to_string(step));
            ++updates;

            if (updates % cfg.policy_delay == 0) {
                Tensor in({n, sd});
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < sd; ++j) in.data[static_cast<std::size_t>(i) * sd + j] = bs[i][j];
                Tensor mu_t = forward(out.actor, in);
                std::vector<std::vector<double>> mu(n, std::vector<double>(ad));
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < ad; ++j) mu[i][j] = mu_t.data[static_cast<std::size_t>(i) * ad + j];

                std::vector<double> combined;
                if (cfg.omega == 1.0 || !cfg.train_oa) {
                    combined = detail::actor_objective_grad(out.actor, out.critic1, bs, mu, nullptr);
                } else {
                    std::vector<std::vector<double>> delta = pgd_min_delta_batch(
                        out.oa_critic, bs, mu, cfg.epsilon, cfg.pgd_steps, cfg.pgd_eta());
                    std::vector<double> g_adv =
                        detail::actor_objective_grad(out.actor, out.oa_critic, bs, mu, &delta);
                    if (cfg.omega == 0.0) {
                        combined = std::move(g_adv);
                    } else {
                        std::vector<double> g_q =
                            detail::actor_objective_grad(out.actor, out.critic1, bs, mu, nullptr);
                        double dot = 0.0;
                        for (std::size_t i = 0; i < g_q.size(); ++i) dot += g_q[i] * g_adv[i];
                        bool conflict = dot < 0.0;
                        if (conflict) ++ep_conflicts;
                        if (conflict && cfg.gradient_surgery) {
                            combined = gradient_surgery_combine(g_q, g_adv, cfg.omega).combined;
                        } else {
                            combined.resize(g_q.size());
                            for (std::size_t i = 0; i < g_q.size(); ++i)
                                combined[i] = cfg.omega * g_q[i] + (1.0 - cfg.omega) * g_adv[i];
                        }
                    }
                }
                adam_step(out.actor.params, combined, opt_actor);
                ++ep_actor_updates;
                detail::soft_update(actor_t, out.actor, cfg.tau);
                detail::soft_update(c1_t, out.critic1, cfg.tau);
                detail::soft_update(c2_t, out.critic2, cfg.tau);
                if (cfg.train_oa) detail::soft_update(oa_t, out.oa_critic, cfg.tau);
            }
        }

        if (sr.done) {
            Td3LogRow row;
            row.step = step;
            row.episode = episode;
            row.nominal_return = ep_return;
            row.critic_loss = last_closs;
            row.oa_critic_loss = last_oa_loss;
            row.conflict_rate =
                ep_actor_updates > 0 ? static_cast<double>(ep_conflicts) / ep_actor_updates : 0.0;
            out.log.push_back(row);
            ++episode;
            ep_return = 0.0;
            ep_steps = 0;
            ep_actor_updates = 0;
            ep_conflicts = 0;
            obs = env.reset(rng_env());
        }
    }
    return out;
}

}  // namespace aapi
