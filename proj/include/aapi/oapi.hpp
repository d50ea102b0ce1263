#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "aapi/common.hpp"
#include "aapi/mdp.hpp"

namespace aapi {

/// Finite perturbation set shared by all actions. Offsets are the embedding
/// differences realized inside the neighborhoods, so applying any offset to
/// any action stays admissible, and applying all offsets to one action
/// covers exactly its neighborhood.
struct PerturbationSet {
    std::vector<std::vector<double>> offsets;  // offset vectors, offsets[0] is zero
    std::vector<std::vector<int>> apply;       // apply[delta][a] -> executed action index
    int n_offsets() const { return static_cast<int>(offsets.size()); }
};

inline PerturbationSet build_perturbation_set(const FiniteAAMdp& mdp) {
    const int A = mdp.n_actions();
    const int d = mdp.action_dim();
    std::vector<std::vector<double>> offs;
    for (int a = 0; a < A; ++a)
        for (int b : mdp.neighborhoods[a]) {
            std::vector<double> diff(d);
            for (int k = 0; k < d; ++k) diff[k] = mdp.action_embeddings[b][k] - mdp.action_embeddings[a][k];
            offs.push_back(std::move(diff));
        }
    std::sort(offs.begin(), offs.end());
    offs.erase(std::unique(offs.begin(), offs.end()), offs.end());
    // zero offset first, rest keep lexicographic order
    std::vector<double> zero(d, 0.0);
    auto it = std::find(offs.begin(), offs.end(), zero);
    if (it != offs.end()) offs.erase(it);
    offs.insert(offs.begin(), zero);

    PerturbationSet ps;
    ps.apply.assign(offs.size(), std::vector<int>(A, 0));
    for (std::size_t o = 0; o < offs.size(); ++o)
        for (int a = 0; a < A; ++a) {
            // target embedding, clamped to the action box
            std::vector<double> target(d);
            for (int k = 0; k < d; ++k) target[k] = clamp(mdp.action_embeddings[a][k] + offs[o][k], -1.0, 1.0);
            int best = -1;
            double best_dist = std::numeric_limits<double>::infinity();
            for (int b : mdp.neighborhoods[a]) {
                double dist = 0.0;
                for (int k = 0; k < d; ++k) dist = std::max(dist, std::abs(mdp.action_embeddings[b][k] - target[k]));
                if (dist < best_dist) {  // ascending neighborhood order, ties keep lowest index
                    best_dist = dist;
                    best = b;
                }
            }
            ps.apply[o][a] = best;
        }
    ps.offsets = std::move(offs);
    return ps;
}

/// Worst next-step value per state: min over shared offsets of the
/// policy-expected q after perturbation.
inline std::vector<double> worst_state_values(const QTable& q, const TabularPolicy& pi,
                                              const PerturbationSet& ps) {
    const int S = q.n_states;
    std::vector<double> v(S, std::numeric_limits<double>::infinity());
    for (int s = 0; s < S; ++s) {
        for (int o = 0; o < ps.n_offsets(); ++o) {
            double w = 0.0;
            if (pi.deterministic) {
                w = q(s, ps.apply[o][pi.action[s]]);
            } else {
                for (int a = 0; a < q.n_actions; ++a) w += pi.prob(s, a) * q(s, ps.apply[o][a]);
            }
            v[s] = std::min(v[s], w);
        }
    }
    return v;
}

/// One application of the OA-aware Bellman operator: the continuation takes
/// the minimum over admissible perturbations, with a single offset shared
/// across the sampled next action.
inline QTable oa_bellman_backup(const QTable& q_adv, const TabularPolicy& pi, const FiniteAAMdp& mdp,
                                const PerturbationSet& ps) {
    check_dims(q_adv, mdp);
    check_dims(pi, mdp);
    const int S = mdp.n_states, A = mdp.n_actions();
    std::vector<double> v = worst_state_values(q_adv, pi, ps);
    QTable out(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            double acc = 0.0;
            const double* row = &mdp.transition[(static_cast<std::size_t>(s) * A + a) * S];
            for (int s2 = 0; s2 < S; ++s2) acc += row[s2] * v[s2];
            out(s, a) = mdp.r(s, a) + mdp.gamma * acc;
        }
    return out;
}

inline QTable oa_bellman_backup(const QTable& q_adv, const TabularPolicy& pi, const FiniteAAMdp& mdp) {
    return oa_bellman_backup(q_adv, pi, mdp, build_perturbation_set(mdp));
}

struct OaEvaluation {
    QTable q_adv;           // fixed point of the OA-aware operator
    std::vector<double> v;  // V under the optimal adversary, per state
};

inline OaEvaluation oa_policy_evaluation(const TabularPolicy& pi, const FiniteAAMdp& mdp, double tol,
                                         const PerturbationSet& ps) {
    if (tol <= 0.0) throw ConfigError("oa_policy_evaluation: tol must be > 0");
    QTable q(mdp.n_states, mdp.n_actions());
    for (long iter = 0; iter < 100'000'000L; ++iter) {
        QTable next = oa_bellman_backup(q, pi, mdp, ps);
        check_finite(next, "oa_policy_evaluation");
        double step = sup_distance(next, q);
        q = std::move(next);
        if (step < tol) break;
    }
    OaEvaluation out;
    out.v = worst_state_values(q, pi, ps);
    out.q_adv = std::move(q);
    return out;
}

inline OaEvaluation oa_policy_evaluation(const TabularPolicy& pi, const FiniteAAMdp& mdp, double tol) {
    return oa_policy_evaluation(pi, mdp, tol, build_perturbation_set(mdp));
}

/// Maximin greedy policy: argmax over actions of the worst perturbed value.
inline TabularPolicy oa_policy_improvement(const QTable& q_adv, const FiniteAAMdp& mdp,
                                           const PerturbationSet& ps) {
    const int S = q_adv.n_states, A = q_adv.n_actions;
    std::vector<int> acts(S, 0);
    for (int s = 0; s < S; ++s) {
        int best = 0;
        double best_val = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) {
            double worst = std::numeric_limits<double>::infinity();
            for (int o = 0; o < ps.n_offsets(); ++o) worst = std::min(worst, q_adv(s, ps.apply[o][a]));
            if (worst > best_val) {  // ties keep the lowest action index
                best_val = worst;
                best = a;
            }
        }
        acts[s] = best;
    }
    return TabularPolicy::make_deterministic(std::move(acts), A);
}

inline TabularPolicy oa_policy_improvement(const QTable& q_adv, const FiniteAAMdp& mdp) {
    return oa_policy_improvement(q_adv, mdp, build_perturbation_set(mdp));
}

struct OaPiTraceRow {
    int iteration = 0;
    double objective = 0.0;  // E_{s~rho} V under the optimal adversary
    bool policy_changed = false;
};

struct OaPiResult {
    TabularPolicy policy;
    QTable q_adv;
    std::vector<OaPiTraceRow> trace;
};

inline double rho_objective(const std::vector<double>& v, const FiniteAAMdp& mdp) {
    double acc = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) acc += mdp.rho[s] * v[s];
    return acc;
}

/// Alternates OA-aware evaluation and maximin improvement until the policy
/// stabilizes.
inline OaPiResult oa_policy_iteration(const FiniteAAMdp& mdp, double tol, int max_iters = 1000) {
    if (tol <= 0.0) throw ConfigError("oa_policy_iteration: tol must be > 0");
    if (max_iters < 1) throw ConfigError("oa_policy_iteration: max_iters must be >= 1");
    const PerturbationSet ps = build_perturbation_set(mdp);
    OaPiResult res;
    res.policy = TabularPolicy::make_deterministic(std::vector<int>(mdp.n_states, 0), mdp.n_actions());
    for (int it = 0; it < max_iters; ++it) {
        OaEvaluation ev = oa_policy_evaluation(res.policy, mdp, tol, ps);
        TabularPolicy next = oa_policy_improvement(ev.q_adv, mdp, ps);
        bool changed = !(next == res.policy);
        res.trace.push_back({it, rho_objective(ev.v, mdp), changed});
        if (!changed) {
            res.q_adv = std::move(ev.q_adv);
            return res;
        }
        res.policy = std::move(next);
    }
    throw ConvergenceError("oa_policy_iteration: policy did not stabilize in " + std::to_string(max_iters) +
                           " iterations (trace has " + std::to_string(max_iters) + " rows)");
}

// --- Adversary-MDP route (the independent oracle for OA evaluation) ---

/// Deterministic perturbation policy of the adversary: one offset index per state.
struct AdversaryPolicy {
    std::vector<int> offset;
};

/// The adversary faces a standard MDP whose actions are the perturbation
/// offsets and whose reward is the negated agent reward along pi.
struct AdversaryMdp {
    FiniteAAMdp mdp;                           // epsilon = 0; actions are offset indices
    std::vector<std::vector<double>> offsets;  // original offset vectors
};

inline AdversaryMdp build_adversary_mdp(const FiniteAAMdp& mdp, const TabularPolicy& pi,
                                        const PerturbationSet& ps) {
    check_dims(pi, mdp);
    const int S = mdp.n_states, A = mdp.n_actions(), O = ps.n_offsets();
    AdversaryMdp adv;
    adv.offsets = ps.offsets;
    adv.mdp.n_states = S;
    adv.mdp.gamma = mdp.gamma;
    adv.mdp.epsilon = 0.0;
    adv.mdp.rho = mdp.rho;
    adv.mdp.action_embeddings.resize(O);
    for (int o = 0; o < O; ++o) {
        adv.mdp.action_embeddings[o] = ps.offsets[o];
        for (double& x : adv.mdp.action_embeddings[o]) x = clamp(x, -1.0, 1.0);
    }
    adv.mdp.transition.assign(static_cast<std::size_t>(S) * O * S, 0.0);
    adv.mdp.reward.assign(static_cast<std::size_t>(S) * O, 0.0);
    for (int s = 0; s < S; ++s)
        for (int o = 0; o < O; ++o) {
            double r_acc = 0.0;
            for (int a = 0; a < A; ++a) {
                double pa = pi.prob(s, a);
                if (pa == 0.0) continue;
                int exec = ps.apply[o][a];
                r_acc += pa * mdp.r(s, exec);
                const double* row = &mdp.transition[(static_cast<std::size_t>(s) * A + exec) * S];
                double* out = &adv.mdp.transition[(static_cast<std::size_t>(s) * O + o) * S];
                for (int s2 = 0; s2 < S; ++s2) out[s2] += pa * row[s2];
            }
            adv.mdp.reward[static_cast<std::size_t>(s) * O + o] = -r_acc;
        }
    adv.mdp.derive_neighborhoods();
    return adv;
}

inline AdversaryMdp build_adversary_mdp(const FiniteAAMdp& mdp, const TabularPolicy& pi) {
    return build_adversary_mdp(mdp, pi, build_perturbation_set(mdp));
}

struct AdversarySolution {
    AdversaryPolicy nu;
    std::vector<double> v;  // agent value per state under (pi, nu*)
};

/// Solves the adversary MDP with vanilla policy iteration and negates,
/// giving the agent's worst-case value under pi.
inline AdversarySolution solve_adversary(const FiniteAAMdp& mdp, const TabularPolicy& pi, double tol,
                                         const PerturbationSet& ps) {
    AdversaryMdp adv = build_adversary_mdp(mdp, pi, ps);
    auto [nu_pi, q] = policy_iteration(adv.mdp, tol);
    AdversarySolution sol;
    sol.nu.offset = nu_pi.action;
    sol.v.resize(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) sol.v[s] = -q(s, nu_pi.action[s]);
    return sol;
}

inline AdversarySolution solve_adversary(const FiniteAAMdp& mdp, const TabularPolicy& pi, double tol) {
    return solve_adversary(mdp, pi, tol, build_perturbation_set(mdp));
}

// --- Brute-force maximin oracle ---

inline std::vector<int> decision_relevant_states(const FiniteAAMdp& mdp) {
    const int S = mdp.n_states, A = mdp.n_actions();
    std::vector<int> relevant;
    for (int s = 0; s < S; ++s) {
        bool differs = false;
        for (int a = 1; a < A && !differs; ++a) {
            if (mdp.r(s, a) != mdp.r(s, 0)) differs = true;
            for (int s2 = 0; s2 < S && !differs; ++s2)
                if (mdp.p(s, a, s2) != mdp.p(s, 0, s2)) differs = true;
        }
        if (differs) relevant.push_back(s);
    }
    return relevant;
}

struct MaximinResult {
    TabularPolicy policy;
    double value = 0.0;  // E_{s~rho} of the worst-case value
};

/// Enumerates every deterministic policy (over states where the action
/// choice matters), evaluates each under its optimal adversary, and returns
/// the best. This is the module's ground-truth oracle.
inline MaximinResult exhaustive_maximin(const FiniteAAMdp& mdp, double tol = 1e-10) {
    const int A = mdp.n_actions();
    const std::vector<int> relevant = decision_relevant_states(mdp);
    double count = 1.0;
    for (std::size_t i = 0; i < relevant.size(); ++i) count *= A;
    if (count > 1e5)
        throw ConfigError("exhaustive_maximin: enumeration count " + std::to_string(count) +
                          " exceeds the 1e5 guard");
    const PerturbationSet ps = build_perturbation_set(mdp);

    std::vector<int> assign(relevant.size(), 0);
    MaximinResult best;
    best.value = -std::numeric_limits<double>::infinity();
    while (true) {
        std::vector<int> acts(mdp.n_states, 0);
        for (std::size_t i = 0; i < relevant.size(); ++i) acts[relevant[i]] = assign[i];
        TabularPolicy pi = TabularPolicy::make_deterministic(std::move(acts), A);
        AdversarySolution sol = solve_adversary(mdp, pi, tol, ps);
        double obj = rho_objective(sol.v, mdp);
        if (obj > best.value) {  // ties keep the first (lexicographically lowest) policy
            best.value = obj;
            best.policy = std::move(pi);
        }
        // odometer increment, last relevant state fastest
        std::size_t i = relevant.size();
        while (i > 0) {
            --i;
            if (++assign[i] < A) break;
            assign[i] = 0;
            if (i == 0) return best;
        }
        if (relevant.empty()) return best;
    }
}

}  // namespace aapi
