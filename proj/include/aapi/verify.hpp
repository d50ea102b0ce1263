#pragma once

#include <random>
#include <string>
#include <vector>

#include "aapi/gridworld.hpp"
#include "aapi/oapi.hpp"

namespace aapi {

/// Random valid instance for property checks: embeddings in [-1,1]^d,
/// rows normalized exactly, epsilon spanning zero to full reach.
inline FiniteAAMdp random_aamdp(std::mt19937_64& rng, int max_states, int max_actions, int dim,
                                double gamma_hint = -1.0) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    FiniteAAMdp mdp;
    mdp.n_states = 2 + static_cast<int>(rng() % (max_states - 1));
    int A = 2 + static_cast<int>(rng() % (max_actions - 1));
    mdp.gamma = gamma_hint >= 0.0 ? gamma_hint : 0.5 + 0.45 * u01(rng);
    mdp.epsilon = u01(rng) < 0.2 ? 0.0 : 2.2 * u01(rng);
    for (int a = 0; a < A; ++a) {
        std::vector<double> e(dim);
        for (double& v : e) v = 2.0 * u01(rng) - 1.0;
        mdp.action_embeddings.push_back(e);
    }
    const int S = mdp.n_states;
    mdp.transition.assign(static_cast<std::size_t>(S) * A * S, 0.0);
    mdp.reward.assign(static_cast<std::size_t>(S) * A, 0.0);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            double total = 0.0;
            std::vector<double> row(S);
            for (int s2 = 0; s2 < S; ++s2) {
                row[s2] = u01(rng) + 1e-3;
                total += row[s2];
            }
            double acc = 0.0;
            for (int s2 = 0; s2 + 1 < S; ++s2) {
                row[s2] /= total;
                acc += row[s2];
            }
            row[S - 1] = 1.0 - acc;
            for (int s2 = 0; s2 < S; ++s2)
                mdp.transition[(static_cast<std::size_t>(s) * A + a) * S + s2] = row[s2];
            mdp.reward[static_cast<std::size_t>(s) * A + a] = 2.0 * u01(rng) - 1.0;
        }
    mdp.rho.assign(S, 0.0);
    double total = 0.0;
    for (int s = 0; s < S; ++s) {
        mdp.rho[s] = u01(rng) + 1e-3;
        total += mdp.rho[s];
    }
    double acc = 0.0;
    for (int s = 0; s + 1 < S; ++s) {
        mdp.rho[s] /= total;
        acc += mdp.rho[s];
    }
    mdp.rho[S - 1] = 1.0 - acc;
    mdp.derive_neighborhoods();
    mdp.validate();
    return mdp;
}

inline QTable random_qtable_for(std::mt19937_64& rng, const FiniteAAMdp& mdp) {
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    QTable q(mdp.n_states, mdp.n_actions());
    for (double& v : q.values) v = u(rng);
    return q;
}

inline TabularPolicy random_policy_for(std::mt19937_64& rng, const FiniteAAMdp& mdp,
                                       bool deterministic) {
    const int S = mdp.n_states, A = mdp.n_actions();
    if (deterministic) {
        std::vector<int> acts(S);
        for (int& a : acts) a = static_cast<int>(rng() % A);
        return TabularPolicy::make_deterministic(std::move(acts), A);
    }
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<double> probs(static_cast<std::size_t>(S) * A);
    for (int s = 0; s < S; ++s) {
        double total = 0.0;
        for (int a = 0; a < A; ++a) {
            probs[static_cast<std::size_t>(s) * A + a] = u01(rng) + 1e-3;
            total += probs[static_cast<std::size_t>(s) * A + a];
        }
        double acc = 0.0;
        for (int a = 0; a + 1 < A; ++a) {
            probs[static_cast<std::size_t>(s) * A + a] /= total;
            acc += probs[static_cast<std::size_t>(s) * A + a];
        }
        probs[static_cast<std::size_t>(s) * A + A - 1] = 1.0 - acc;
    }
    return TabularPolicy::make_stochastic(S, A, std::move(probs));
}

struct PropertyResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Worst-case Bellman operator is a gamma contraction in sup-norm.
inline PropertyResult check_contraction(std::uint64_t seed, int trials) {
    auto rng = rng_stream(seed, 0x7001);
    double worst = 0.0;
    for (int i = 0; i < trials; ++i) {
        FiniteAAMdp mdp = random_aamdp(rng, 20, 5, 2);
        TabularPolicy pi = random_policy_for(rng, mdp, i % 2 == 0);
        QTable q1 = random_qtable_for(rng, mdp);
        QTable q2 = random_qtable_for(rng, mdp);
        double lhs = sup_distance(oa_bellman_backup(q1, pi, mdp), oa_bellman_backup(q2, pi, mdp));
        double slack = lhs - mdp.gamma * sup_distance(q1, q2);
        worst = std::max(worst, slack);
        if (slack > 1e-12)
            return {"contraction", false,
                    "violated by " + std::to_string(slack) + " on trial " + std::to_string(i)};
    }
    return {"contraction", true, "max slack " + std::to_string(worst)};
}

/// Worst-case evaluation agrees with the adversary-side optimum.
inline PropertyResult check_adversary_equivalence(std::uint64_t seed, int trials) {
    auto rng = rng_stream(seed, 0x7002);
    double worst = 0.0;
    for (int i = 0; i < trials; ++i) {
        FiniteAAMdp mdp = random_aamdp(rng, 10, 4, 2);
        TabularPolicy pi = random_policy_for(rng, mdp, i % 2 == 0);
        OaEvaluation oa = oa_policy_evaluation(pi, mdp, 1e-12);
        AdversarySolution adv = solve_adversary(mdp, pi, 1e-12);
        double gap = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) gap = std::max(gap, std::abs(oa.v[s] - adv.v[s]));
        worst = std::max(worst, gap);
        if (gap > 1e-8)
            return {"adversary_equivalence", false,
                    "gap " + std::to_string(gap) + " on trial " + std::to_string(i)};
    }
    return {"adversary_equivalence", true, "max gap " + std::to_string(worst)};
}

/// Worst-case state values never decrease across improvement sweeps.
inline PropertyResult check_monotone_improvement(std::uint64_t seed, int trials) {
    auto rng = rng_stream(seed, 0x7003);
    for (int i = 0; i < trials; ++i) {
        FiniteAAMdp mdp = random_aamdp(rng, 8, 4, 2);
        OaPiResult res = oa_policy_iteration(mdp, 1e-12);
        for (std::size_t k = 1; k < res.trace.size(); ++k)
            if (res.trace[k].objective < res.trace[k - 1].objective - 1e-10)
                return {"monotone_improvement", false,
                        "objective dropped at iteration " + std::to_string(k) + " of trial " +
                            std::to_string(i)};
    }
    return {"monotone_improvement", true, ""};
}

/// The iteration's fixed point attains the exhaustive maximin optimum.
inline PropertyResult check_optimality(std::uint64_t seed, int trials) {
    auto rng = rng_stream(seed, 0x7004);
    double worst = 0.0;
    for (int i = 0; i < trials; ++i) {
        FiniteAAMdp mdp = random_aamdp(rng, 4, 3, 1);
        OaPiResult res = oa_policy_iteration(mdp, 1e-12);
        MaximinResult brute = exhaustive_maximin(mdp, 1e-12);
        double gap = std::abs(res.trace.back().objective - brute.value);
        worst = std::max(worst, gap);
        if (gap > 1e-8)
            return {"optimality", false, "gap " + std::to_string(gap) + " on trial " + std::to_string(i)};
    }
    return {"optimality", true, "max gap " + std::to_string(worst)};
}

/// With epsilon = 0 the robust iteration collapses to vanilla policy iteration.
inline PropertyResult check_eps_zero_reduction(std::uint64_t seed, int trials) {
    auto rng = rng_stream(seed, 0x7005);
    for (int i = 0; i < trials; ++i) {
        FiniteAAMdp mdp = random_aamdp(rng, 8, 4, 2);
        mdp.epsilon = 0.0;
        mdp.derive_neighborhoods();
        OaPiResult oa = oa_policy_iteration(mdp, 1e-12);
        auto [pi, q] = policy_iteration(mdp, 1e-12);
        if (oa.policy.action != pi.action)
            return {"eps_zero_reduction", false, "policies differ on trial " + std::to_string(i)};
        if (sup_distance(oa.q_adv, q) > 1e-10)
            return {"eps_zero_reduction", false, "q tables differ on trial " + std::to_string(i)};
    }
    return {"eps_zero_reduction", true, ""};
}

inline std::vector<PropertyResult> run_theorem_suite(std::uint64_t seed) {
    return {check_contraction(seed, 200), check_adversary_equivalence(seed, 100),
            check_monotone_improvement(seed, 50), check_optimality(seed, 50),
            check_eps_zero_reduction(seed, 50)};
}

}  // namespace aapi
