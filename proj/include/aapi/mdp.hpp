#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "aapi/common.hpp"

namespace aapi {

constexpr double kProbTol = 1e-12;
constexpr double kNeighborTol = 1e-12;

/// Dense state x action value table.
struct QTable {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> values;  // row-major (s, a)

    QTable() = default;
    QTable(int s, int a, double fill = 0.0)
        : n_states(s), n_actions(a), values(static_cast<std::size_t>(s) * a, fill) {}

    double operator()(int s, int a) const { return values[static_cast<std::size_t>(s) * n_actions + a]; }
    double& operator()(int s, int a) { return values[static_cast<std::size_t>(s) * n_actions + a]; }
};

inline double sup_distance(const QTable& a, const QTable& b) {
    if (a.n_states != b.n_states || a.n_actions != b.n_actions)
        throw DimensionError("sup_distance: tables of shape (" + std::to_string(a.n_states) + "," +
                             std::to_string(a.n_actions) + ") vs (" + std::to_string(b.n_states) + "," +
                             std::to_string(b.n_actions) + ")");
    double d = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) d = std::max(d, std::abs(a.values[i] - b.values[i]));
    return d;
}

/// Tabular policy, deterministic (action index per state) or stochastic
/// (probability row per state). Deterministic is the one-hot special case.
struct TabularPolicy {
    bool deterministic = true;
    std::vector<int> action;        // used when deterministic
    std::vector<double> probs;      // row-major (s, a), used otherwise
    int n_states = 0;
    int n_actions = 0;

    static TabularPolicy make_deterministic(std::vector<int> acts, int n_actions) {
        TabularPolicy p;
        p.deterministic = true;
        p.n_states = static_cast<int>(acts.size());
        p.n_actions = n_actions;
        p.action = std::move(acts);
        return p;
    }

    static TabularPolicy make_stochastic(int n_states, int n_actions, std::vector<double> probs) {
        TabularPolicy p;
        p.deterministic = false;
        p.n_states = n_states;
        p.n_actions = n_actions;
        p.probs = std::move(probs);
        if (p.probs.size() != static_cast<std::size_t>(n_states) * n_actions)
            throw DimensionError("stochastic policy: prob table size mismatch");
        for (int s = 0; s < n_states; ++s) {
            double row = 0.0;
            for (int a = 0; a < n_actions; ++a) row += p.probs[static_cast<std::size_t>(s) * n_actions + a];
            if (std::abs(row - 1.0) > kProbTol)
                throw ConfigError("stochastic policy: row " + std::to_string(s) + " sums to " + std::to_string(row));
        }
        return p;
    }

    double prob(int s, int a) const {
        if (deterministic) return action[s] == a ? 1.0 : 0.0;
        return probs[static_cast<std::size_t>(s) * n_actions + a];
    }

    bool operator==(const TabularPolicy& o) const {
        if (deterministic != o.deterministic) return false;
        return deterministic ? action == o.action : probs == o.probs;
    }
};

/// Finite action-adversarial MDP. Actions are embedded in [-1,1]^d and the
/// adversary's reach is the finite neighborhood N_eps(a) of each embedding
/// under an l-infinity budget eps. Neighborhoods are derived, never stored
/// externally.
struct FiniteAAMdp {
    int n_states = 0;
    std::vector<std::vector<double>> action_embeddings;  // one vector in [-1,1]^d per action
    std::vector<double> transition;                      // (s, a, s') row-major
    std::vector<double> reward;                          // (s, a)
    double gamma = 0.99;
    std::vector<double> rho;                             // initial distribution
    double epsilon = 0.0;
    std::vector<std::vector<int>> neighborhoods;         // derived: N_eps(a), ascending indices

    int n_actions() const { return static_cast<int>(action_embeddings.size()); }
    int action_dim() const { return action_embeddings.empty() ? 0 : static_cast<int>(action_embeddings[0].size()); }

    double p(int s, int a, int s2) const {
        return transition[(static_cast<std::size_t>(s) * n_actions() + a) * n_states + s2];
    }
    double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_actions() + a]; }

    double embed_dist(int a, int b) const {
        double d = 0.0;
        for (std::size_t k = 0; k < action_embeddings[a].size(); ++k)
            d = std::max(d, std::abs(action_embeddings[a][k] - action_embeddings[b][k]));
        return d;
    }

    /// Recompute neighborhoods from the embeddings. eps = 0 always yields {a}.
    void derive_neighborhoods() {
        const int A = n_actions();
        neighborhoods.assign(A, {});
        for (int a = 0; a < A; ++a) {
            if (epsilon == 0.0) {
                neighborhoods[a] = {a};
                continue;
            }
            for (int b = 0; b < A; ++b)
                if (embed_dist(a, b) <= epsilon + kNeighborTol) neighborhoods[a].push_back(b);
        }
    }

    void validate() const {
        const int A = n_actions();
        if (n_states <= 0 || A <= 0) throw ConfigError("mdp: empty state or action set");
        const int d = action_dim();
        for (int a = 0; a < A; ++a) {
            if (static_cast<int>(action_embeddings[a].size()) != d)
                throw DimensionError("mdp: embedding of action " + std::to_string(a) + " has wrong dimension");
            for (double x : action_embeddings[a])
                if (x < -1.0 - kNeighborTol || x > 1.0 + kNeighborTol)
                    throw ConfigError("mdp: embedding of action " + std::to_string(a) + " leaves [-1,1]");
        }
        if (transition.size() != static_cast<std::size_t>(n_states) * A * n_states)
            throw DimensionError("mdp: transition tensor size mismatch on axis (state,action,next_state)");
        if (reward.size() != static_cast<std::size_t>(n_states) * A)
            throw DimensionError("mdp: reward tensor size mismatch on axis (state,action)");
        if (static_cast<int>(rho.size()) != n_states)
            throw DimensionError("mdp: rho size mismatch on axis state");
        if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("mdp: gamma must lie in [0,1)");
        if (epsilon < 0.0) throw ConfigError("mdp: epsilon must be >= 0");
        for (int s = 0; s < n_states; ++s)
            for (int a = 0; a < A; ++a) {
                double row = 0.0;
                for (int s2 = 0; s2 < n_states; ++s2) {
                    double v = p(s, a, s2);
                    if (v < 0.0) throw ConfigError("mdp: negative transition probability at state " +
                                                   std::to_string(s) + ", action " + std::to_string(a));
                    row += v;
                }
                if (std::abs(row - 1.0) > kProbTol)
                    throw ConfigError("mdp: transition row (s=" + std::to_string(s) + ", a=" + std::to_string(a) +
                                      ") sums to " + std::to_string(row));
            }
        double rsum = 0.0;
        for (double v : rho) {
            if (v < 0.0) throw ConfigError("mdp: negative initial probability");
            rsum += v;
        }
        if (std::abs(rsum - 1.0) > kProbTol) throw ConfigError("mdp: rho sums to " + std::to_string(rsum));
        if (neighborhoods.size() != static_cast<std::size_t>(A))
            throw ConfigError("mdp: neighborhoods not derived");
        for (int a = 0; a < A; ++a)
            if (!std::binary_search(neighborhoods[a].begin(), neighborhoods[a].end(), a))
                throw ConfigError("mdp: zero perturbation missing from N_eps(" + std::to_string(a) + ")");
    }
};

inline void check_dims(const QTable& q, const FiniteAAMdp& mdp) {
    if (q.n_states != mdp.n_states)
        throw DimensionError("q table: state axis " + std::to_string(q.n_states) + " vs mdp " +
                             std::to_string(mdp.n_states));
    if (q.n_actions != mdp.n_actions())
        throw DimensionError("q table: action axis " + std::to_string(q.n_actions) + " vs mdp " +
                             std::to_string(mdp.n_actions()));
}

inline void check_dims(const TabularPolicy& pi, const FiniteAAMdp& mdp) {
    if (pi.n_states != mdp.n_states)
        throw DimensionError("policy: state axis " + std::to_string(pi.n_states) + " vs mdp " +
                             std::to_string(mdp.n_states));
    if (pi.n_actions != mdp.n_actions())
        throw DimensionError("policy: action axis " + std::to_string(pi.n_actions) + " vs mdp " +
                             std::to_string(mdp.n_actions()));
}

/// Expected next-step value of q under pi, per state.
inline std::vector<double> state_values(const QTable& q, const TabularPolicy& pi) {
    std::vector<double> v(q.n_states, 0.0);
    for (int s = 0; s < q.n_states; ++s) {
        if (pi.deterministic) {
            v[s] = q(s, pi.action[s]);
        } else {
            double acc = 0.0;
            for (int a = 0; a < q.n_actions; ++a) acc += pi.prob(s, a) * q(s, a);
            v[s] = acc;
        }
    }
    return v;
}

/// One application of the Bellman operator for a fixed policy.
inline QTable bellman_backup(const QTable& q, const TabularPolicy& pi, const FiniteAAMdp& mdp) {
    check_dims(q, mdp);
    check_dims(pi, mdp);
    const int S = mdp.n_states, A = mdp.n_actions();
    std::vector<double> v = state_values(q, pi);
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

inline void check_finite(const QTable& q, const char* who) {
    for (double v : q.values)
        if (!std::isfinite(v)) throw NumericError(std::string(who) + ": diverged to non-finite values");
}

/// Fixed-point iteration from q = 0 until the sup-norm step drops below tol.
inline QTable policy_evaluation(const TabularPolicy& pi, const FiniteAAMdp& mdp, double tol) {
    if (tol <= 0.0) throw ConfigError("policy_evaluation: tol must be > 0");
    QTable q(mdp.n_states, mdp.n_actions());
    for (long iter = 0; iter < 100'000'000L; ++iter) {
        QTable next = bellman_backup(q, pi, mdp);
        check_finite(next, "policy_evaluation");
        double step = sup_distance(next, q);
        q = std::move(next);
        if (step < tol) return q;
    }
    throw ConvergenceError("policy_evaluation: iteration budget exhausted");
}

/// Greedy deterministic policy; ties break to the lowest action index.
inline TabularPolicy greedy_improve(const QTable& q) {
    std::vector<int> acts(q.n_states, 0);
    for (int s = 0; s < q.n_states; ++s) {
        int best = 0;
        for (int a = 1; a < q.n_actions; ++a)
            if (q(s, a) > q(s, best)) best = a;
        acts[s] = best;
    }
    return TabularPolicy::make_deterministic(std::move(acts), q.n_actions);
}

/// Vanilla policy iteration; terminates on policy stability.
inline std::pair<TabularPolicy, QTable> policy_iteration(const FiniteAAMdp& mdp, double tol,
                                                         int max_iters = 1000) {
    TabularPolicy pi = TabularPolicy::make_deterministic(std::vector<int>(mdp.n_states, 0), mdp.n_actions());
    QTable q;
    for (int it = 0; it < max_iters; ++it) {
        q = policy_evaluation(pi, mdp, tol);
        TabularPolicy next = greedy_improve(q);
        if (next == pi) return {pi, q};
        pi = std::move(next);
    }
    throw ConvergenceError("policy_iteration: no stable policy within max_iters");
}

// --- JSON schema: {"n_states","gamma","epsilon","action_embeddings","transition","reward","rho"} ---

inline nlohmann::json mdp_to_json(const FiniteAAMdp& mdp) {
    nlohmann::json j;
    j["n_states"] = mdp.n_states;
    j["gamma"] = mdp.gamma;
    j["epsilon"] = mdp.epsilon;
    j["action_embeddings"] = mdp.action_embeddings;
    j["transition"] = mdp.transition;
    j["reward"] = mdp.reward;
    j["rho"] = mdp.rho;
    return j;
}

inline FiniteAAMdp mdp_from_json(const nlohmann::json& j) {
    FiniteAAMdp mdp;
    try {
        mdp.n_states = j.at("n_states").get<int>();
        mdp.gamma = j.at("gamma").get<double>();
        mdp.epsilon = j.at("epsilon").get<double>();
        mdp.action_embeddings = j.at("action_embeddings").get<std::vector<std::vector<double>>>();
        mdp.transition = j.at("transition").get<std::vector<double>>();
        mdp.reward = j.at("reward").get<std::vector<double>>();
        mdp.rho = j.at("rho").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("mdp json: ") + e.what());
    }
    mdp.derive_neighborhoods();
    mdp.validate();
    return mdp;
}

}  // namespace aapi
