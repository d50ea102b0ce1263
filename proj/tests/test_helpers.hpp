#pragma once

#include <random>
#include <vector>

#include "aapi/mdp.hpp"

namespace aapi_test {

// Dense Gaussian elimination with partial pivoting; solves A x = b in place.
inline std::vector<double> solve_linear(std::vector<std::vector<double>> A, std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[pivot][col])) pivot = r;
        std::swap(A[col], A[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < n; ++r) {
            double f = A[r][col] / A[col][col];
            for (int c = col; c < n; ++c) A[r][c] -= f * A[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[r];
        for (int c = r + 1; c < n; ++c) acc -= A[r][c] * x[c];
        x[r] = acc / A[r][r];
    }
    return x;
}

// Independent evaluation oracle: solve (I - gamma P_pi) V = R_pi directly,
// then read Q off one backup.
inline aapi::QTable linear_solve_evaluation(const aapi::TabularPolicy& pi, const aapi::FiniteAAMdp& mdp) {
    const int S = mdp.n_states, A = mdp.n_actions();
    std::vector<std::vector<double>> M(S, std::vector<double>(S, 0.0));
    std::vector<double> rhs(S, 0.0);
    for (int s = 0; s < S; ++s) {
        M[s][s] += 1.0;
        for (int a = 0; a < A; ++a) {
            double pa = pi.prob(s, a);
            if (pa == 0.0) continue;
            rhs[s] += pa * mdp.r(s, a);
            for (int s2 = 0; s2 < S; ++s2) M[s][s2] -= mdp.gamma * pa * mdp.p(s, a, s2);
        }
    }
    std::vector<double> v = solve_linear(std::move(M), std::move(rhs));
    aapi::QTable q(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            double acc = 0.0;
            for (int s2 = 0; s2 < S; ++s2) acc += mdp.p(s, a, s2) * v[s2];
            q(s, a) = mdp.r(s, a) + mdp.gamma * acc;
        }
    return q;
}

inline std::vector<double> random_prob_row(std::mt19937_64& rng, int n) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> row(n);
    double sum = 0.0;
    for (double& v : row) sum += (v = e(rng) + 1e-3);
    double partial = 0.0;
    for (int i = 0; i < n - 1; ++i) partial += (row[i] /= sum);
    row[n - 1] = 1.0 - partial;
    return row;
}

inline aapi::FiniteAAMdp random_mdp(std::mt19937_64& rng, int n_states, int n_actions, int action_dim,
                                    double epsilon, double gamma = 0.9) {
    aapi::FiniteAAMdp mdp;
    mdp.n_states = n_states;
    mdp.gamma = gamma;
    mdp.epsilon = epsilon;
    std::uniform_real_distribution<double> box(-1.0, 1.0);
    mdp.action_embeddings.resize(n_actions);
    for (auto& e : mdp.action_embeddings) {
        e.resize(action_dim);
        for (double& x : e) x = box(rng);
    }
    mdp.transition.reserve(static_cast<std::size_t>(n_states) * n_actions * n_states);
    for (int i = 0; i < n_states * n_actions; ++i) {
        auto row = random_prob_row(rng, n_states);
        mdp.transition.insert(mdp.transition.end(), row.begin(), row.end());
    }
    mdp.reward.resize(static_cast<std::size_t>(n_states) * n_actions);
    for (double& r : mdp.reward) r = box(rng);
    mdp.rho = random_prob_row(rng, n_states);
    mdp.derive_neighborhoods();
    mdp.validate();
    return mdp;
}

inline aapi::QTable random_qtable(std::mt19937_64& rng, int n_states, int n_actions, double scale = 5.0) {
    aapi::QTable q(n_states, n_actions);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& v : q.values) v = u(rng);
    return q;
}

inline aapi::TabularPolicy random_policy(std::mt19937_64& rng, int n_states, int n_actions,
                                         bool deterministic) {
    if (deterministic) {
        std::uniform_int_distribution<int> pick(0, n_actions - 1);
        std::vector<int> acts(n_states);
        for (int& a : acts) a = pick(rng);
        return aapi::TabularPolicy::make_deterministic(std::move(acts), n_actions);
    }
    std::vector<double> probs;
    for (int s = 0; s < n_states; ++s) {
        auto row = random_prob_row(rng, n_actions);
        probs.insert(probs.end(), row.begin(), row.end());
    }
    return aapi::TabularPolicy::make_stochastic(n_states, n_actions, std::move(probs));
}

}  // namespace aapi_test
