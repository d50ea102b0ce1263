#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "aapi/env.hpp"
#include "aapi/gae.hpp"
#include "aapi/net.hpp"
#include "aapi/pgd.hpp"
#include "aapi/td3.hpp"

namespace aapi {

struct PpoConfig {
    double epsilon = 0.0;
    double omega = 1.0;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    int rollout_steps = 1024;
    int minibatches = 4;
    int update_epochs = 10;
    double surrogate_clip = 0.2;
    double grad_norm_clip = 0.5;
    double lr = 3e-4;
    bool lr_decay = true;
    int pgd_steps = 16;
    double pgd_step_size = 0.0;
    long total_steps = 50000;
    std::uint64_t seed = 0;
    bool train_oa = true;
    std::vector<int> hidden = {64, 64};

    double pgd_eta() const {
        if (pgd_step_size > 0.0) return pgd_step_size;
        return pgd_steps > 0 ? epsilon / pgd_steps : 0.0;
    }
    void validate() const {
        if (epsilon < 0.0) throw ConfigError("ppo config: epsilon must be >= 0");
        if (omega < 0.0 || omega > 1.0) throw ConfigError("ppo config: omega outside [0,1]");
        if (gae_lambda < 0.0 || gae_lambda > 1.0) throw ConfigError("ppo config: lambda outside [0,1]");
        if (surrogate_clip <= 0.0 || surrogate_clip >= 1.0)
            throw ConfigError("ppo config: surrogate clip outside (0,1)");
        if (rollout_steps < 2 || minibatches < 1 || update_epochs < 1)
            throw ConfigError("ppo config: bad rollout/minibatch/epoch counts");
        if (rollout_steps % minibatches != 0)
            throw ConfigError("ppo config: minibatches must divide rollout_steps");
        if (pgd_steps < 1) throw ConfigError("ppo config: pgd_steps must be >= 1");
        if (hidden.empty()) throw ConfigError("ppo config: need at least one hidden layer");
    }
};

/// Squashed-mean Gaussian policy with a state-independent log-std vector.
struct GaussianPolicy {
    DenseNet mean_net;
    std::vector<double> log_std;

    int act_dim() const { return mean_net.output_size(); }

    std::vector<double> mean(const std::vector<double>& s) const {
        Tensor m = forward(mean_net, Tensor({mean_net.input_size()}, s));
        return m.data;
    }

    double log_prob(const std::vector<double>& mean_row, const std::vector<double>& a) const {
        double lp = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) {
            double sigma = std::exp(log_std[j]);
            double z = (a[j] - mean_row[j]) / sigma;
            lp += -0.5 * z * z - log_std[j] - 0.5 * std::log(2.0 * 3.14159265358979323846);
        }
        return lp;
    }
};

using PpoLogRow = Td3LogRow;  // same CSV columns; conflict_rate stays 0

struct PpoResult {
    GaussianPolicy policy;
    DenseNet value_net;
    DenseNet oa_critic;
    std::vector<PpoLogRow> log;
};

namespace detail {

inline DenseNet make_value_net(int obs, const std::vector<int>& hidden, std::mt19937_64& rng) {
    std::vector<int> sizes{obs};
    std::vector<Activation> acts;
    for (int h : hidden) {
        sizes.push_back(h);
        acts.push_back(Activation::Tanh);
    }
    sizes.push_back(1);
    acts.push_back(Activation::Identity);
    DenseNet net = DenseNet::make(sizes, acts);
    net.init(rng);
    return net;
}

inline double global_norm(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (double v : a) s += v * v;
    for (double v : b) s += v * v;
    return std::sqrt(s);
}

}  // namespace detail

/// Clipped-surrogate training with a value baseline and a robustness critic.
/// The policy signal mixes the normalized advantage with the robustness
/// critic's value at the attacked action; omega = 1 recovers plain PPO.
inline PpoResult oa_ppo_train(Env& env, const PpoConfig& cfg) {
    cfg.validate();
    const int sd = env.obs_dim(), ad = env.act_dim();

    auto rng_init_pi = rng_stream(cfg.seed, 0xbb01);
    auto rng_init_v = rng_stream(cfg.seed, 0xbb02);
    auto rng_init_oa = rng_stream(cfg.seed, 0xbb03);
    auto rng_sample = rng_stream(cfg.seed, 0xbb04);
    auto rng_shuffle = rng_stream(cfg.seed, 0xbb05);
    auto rng_env = rng_stream(cfg.seed, 0xbb06);

    PpoResult out;
    {
        std::vector<int> sizes{sd};
        std::vector<Activation> acts;
        for (int h : cfg.hidden) {
            sizes.push_back(h);
            acts.push_back(Activation::Tanh);
        }
        sizes.push_back(ad);
        acts.push_back(Activation::Tanh);
        out.policy.mean_net = DenseNet::make(sizes, acts);
        out.policy.mean_net.init(rng_init_pi);
        out.policy.log_std.assign(ad, 0.0);
    }
    out.value_net = detail::make_value_net(sd, cfg.hidden, rng_init_v);
    out.oa_critic = detail::make_critic(sd, ad, cfg.hidden, rng_init_oa);

    AdamState opt_pi = AdamState::make(out.policy.mean_net.params.size(), cfg.lr, "policy");
    AdamState opt_std = AdamState::make(static_cast<std::size_t>(ad), cfg.lr, "log_std");
    AdamState opt_v = AdamState::make(out.value_net.params.size(), cfg.lr, "value");
    AdamState opt_oa = AdamState::make(out.oa_critic.params.size(), cfg.lr, "oa_critic");

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> obs = env.reset(rng_env());
    int episode = 0, ep_steps = 0;
    double ep_return = 0.0, last_vloss = 0.0, last_oa_loss = 0.0;
    std::vector<PpoLogRow> pending_rows;

    const int T = cfg.rollout_steps;
    long steps_done = 0;
    while (steps_done < cfg.total_steps) {
        // --- rollout ---
        std::vector<std::vector<double>> S(T), A_raw(T), A_exec(T), S_next(T);
        std::vector<double> R(T), logp_old(T);
        std::vector<bool> terminal(T), segment_end(T);
        for (int t = 0; t < T; ++t) {
            std::vector<double> m = out.policy.mean(obs);
            std::vector<double> a(ad);
            for (int j = 0; j < ad; ++j) a[j] = m[j] + std::exp(out.policy.log_std[j]) * gauss(rng_sample);
            S[t] = obs;
            A_raw[t] = a;
            A_exec[t] = clip_action(a, ad);
            logp_old[t] = out.policy.log_prob(m, a);
            StepResult sr = env.step(A_exec[t]);
            ++ep_steps;
            ep_return += sr.reward;
            R[t] = sr.reward;
            S_next[t] = sr.obs;
            terminal[t] = sr.done && ep_steps < env.max_episode_steps();
            segment_end[t] = sr.done;
            obs = sr.obs;
            if (sr.done) {
                PpoLogRow row;
                row.step = steps_done + t + 1;
                row.episode = episode;
                row.nominal_return = ep_return;
                pending_rows.push_back(row);
                ++episode;
                ep_return = 0.0;
                ep_steps = 0;
                obs = env.reset(rng_env());
            }
        }

        // --- advantages, per episode segment with bootstrap at cuts ---
        std::vector<double> adv(T), ret(T);
        int seg_start = 0;
        while (seg_start < T) {
            int seg_end = seg_start;
            while (seg_end + 1 < T && !segment_end[seg_end]) ++seg_end;
            int len = seg_end - seg_start + 1;
            std::vector<double> vals(len + 1), rews(len);
            std::vector<bool> dn(len);
            for (int i = 0; i < len; ++i) {
                vals[i] = forward(out.value_net, Tensor({sd}, S[seg_start + i]))[0];
                rews[i] = R[seg_start + i];
                dn[i] = terminal[seg_start + i];
            }
            vals[len] = forward(out.value_net, Tensor({sd}, S_next[seg_end]))[0];
            GaeResult g = gae_advantages(rews, vals, dn, cfg.gamma, cfg.gae_lambda);
            for (int i = 0; i < len; ++i) {
                adv[seg_start + i] = g.advantages[i];
                ret[seg_start + i] = g.returns_to_go[i];
            }
            seg_start = seg_end + 1;
        }

        double lr_now = cfg.lr;
        if (cfg.lr_decay)
            lr_now = cfg.lr * (1.0 - static_cast<double>(steps_done) / cfg.total_steps);
        opt_pi.lr = opt_std.lr = opt_v.lr = opt_oa.lr = lr_now;

        // --- robustness critic regression ---
        std::vector<double> q_adv_mix(T, 0.0);
        if (cfg.train_oa) {
            std::vector<std::vector<double>> ns(T), na(T);
            for (int t = 0; t < T; ++t) {
                ns[t] = S_next[t];
                if (t + 1 < T && !segment_end[t])
                    na[t] = A_exec[t + 1];
                else
                    na[t] = clip_action(out.policy.mean(S_next[t]), ad);
            }
            auto delta = pgd_min_delta_batch(out.oa_critic, ns, na, cfg.epsilon, cfg.pgd_steps,
                                             cfg.pgd_eta());
            std::vector<std::vector<double>> na_pert(T, std::vector<double>(ad));
            for (int t = 0; t < T; ++t)
                for (int j = 0; j < ad; ++j) na_pert[t][j] = clamp(na[t][j] + delta[t][j], -1.0, 1.0);
            Tensor qa_next = forward(out.oa_critic, detail::concat_rows(ns, na_pert));
            std::vector<double> y_adv(T);
            for (int t = 0; t < T; ++t)
                y_adv[t] = R[t] + cfg.gamma * (terminal[t] ? 0.0 : 1.0) * qa_next[t];
            Tensor x = detail::concat_rows(S, A_exec);
            for (int e = 0; e < cfg.update_epochs; ++e)
                last_oa_loss = detail::critic_regress(out.oa_critic, opt_oa, x, y_adv);

            if (cfg.omega < 1.0) {
                auto d_here = pgd_min_delta_batch(out.oa_critic, S, A_exec, cfg.epsilon,
                                                 cfg.pgd_steps, cfg.pgd_eta());
                std::vector<std::vector<double>> a_pert(T, std::vector<double>(ad));
                for (int t = 0; t < T; ++t)
                    for (int j = 0; j < ad; ++j)
                        a_pert[t][j] = clamp(A_exec[t][j] + d_here[t][j], -1.0, 1.0);
                Tensor qa = forward(out.oa_critic, detail::concat_rows(S, a_pert));
                for (int t = 0; t < T; ++t) q_adv_mix[t] = qa[t];
            }
        }

        // --- policy and value updates ---
        const int mb = T / cfg.minibatches;
        std::vector<int> order(T);
        std::iota(order.begin(), order.end(), 0);
        for (int e = 0; e < cfg.update_epochs; ++e) {
            std::shuffle(order.begin(), order.end(), rng_shuffle);
            for (int b = 0; b < cfg.minibatches; ++b) {
                std::vector<int> ids(order.begin() + b * mb, order.begin() + (b + 1) * mb);

                double amean = 0.0, avar = 0.0;
                for (int i : ids) amean += adv[i] / mb;
                for (int i : ids) avar += (adv[i] - amean) * (adv[i] - amean) / mb;
                double astd = std::sqrt(avar) + 1e-8;

                Tensor in({mb, sd});
                for (int k = 0; k < mb; ++k)
                    for (int j = 0; j < sd; ++j)
                        in.data[static_cast<std::size_t>(k) * sd + j] = S[ids[k]][j];
                Tape tape;
                Tensor mu = forward(out.policy.mean_net, in, &tape);

                Tensor up({mb, ad});
                std::vector<double> g_std(ad, 0.0);
                for (int k = 0; k < mb; ++k) {
                    int i = ids[k];
                    const double* mrow = &mu.data[static_cast<std::size_t>(k) * ad];
                    std::vector<double> mvec(mrow, mrow + ad);
                    double lp = out.policy.log_prob(mvec, A_raw[i]);
                    double ratio = std::exp(lp - logp_old[i]);
                    double a_norm = (adv[i] - amean) / astd;
                    double a_tilde = cfg.omega == 1.0
                                         ? a_norm
                                         : cfg.omega * a_norm + (1.0 - cfg.omega) * q_adv_mix[i];
                    double surr1 = ratio * a_tilde;
                    double clipped = clamp(ratio, 1.0 - cfg.surrogate_clip, 1.0 + cfg.surrogate_clip);
                    double surr2 = clipped * a_tilde;
                    double coeff = surr1 <= surr2 ? -a_tilde * ratio / mb : 0.0;
                    for (int j = 0; j < ad; ++j) {
                        double sigma = std::exp(out.policy.log_std[j]);
                        double z = (A_raw[i][j] - mvec[j]) / sigma;
                        up.data[static_cast<std::size_t>(k) * ad + j] = coeff * z / sigma;
                        g_std[j] += coeff * (z * z - 1.0);
                    }
                }
                Gradients g_pi = backward(out.policy.mean_net, tape, up);
                double norm = detail::global_norm(g_pi.params, g_std);
                if (norm > cfg.grad_norm_clip && norm > 0.0) {
                    double scale = cfg.grad_norm_clip / norm;
                    for (double& v : g_pi.params) v *= scale;
                    for (double& v : g_std) v *= scale;
                }
                adam_step(out.policy.mean_net.params, g_pi.params, opt_pi);
                adam_step(out.policy.log_std, g_std, opt_std);

                Tape vtape;
                Tensor vpred = forward(out.value_net, in, &vtape);
                Tensor vup({mb, 1});
                double vloss = 0.0;
                for (int k = 0; k < mb; ++k) {
                    double err = vpred[k] - ret[ids[k]];
                    vloss += err * err / mb;
                    vup[k] = 2.0 * err / mb;
                }
                Gradients g_v = backward(out.value_net, vtape, vup);
                double vnorm = detail::global_norm(g_v.params, {});
                if (vnorm > cfg.grad_norm_clip && vnorm > 0.0)
                    for (double& v : g_v.params) v *= cfg.grad_norm_clip / vnorm;
                adam_step(out.value_net.params, g_v.params, opt_v);
                last_vloss = vloss;
                if (!std::isfinite(vloss) || !std::isfinite(last_oa_loss))
                    throw NumericError("ppo: non-finite loss after " + std::to_string(steps_done) +
                                       " environment steps");
            }
        }

        steps_done += T;
        for (PpoLogRow& row : pending_rows) {
            row.critic_loss = last_vloss;
            row.oa_critic_loss = last_oa_loss;
            out.log.push_back(row);
        }
        pending_rows.clear();
    }
    return out;
}

}  // namespace aapi
