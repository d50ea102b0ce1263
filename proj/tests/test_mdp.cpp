#include <doctest.h>

#include "aapi/gridworld.hpp"
#include "aapi/mdp.hpp"
#include "test_helpers.hpp"

using namespace aapi;
using namespace aapi_test;

namespace {

// 2-state, 1-action chain with deterministic self-loops, R = 1, gamma = 0.5.
FiniteAAMdp self_loop_chain() {
    FiniteAAMdp mdp;
    mdp.n_states = 2;
    mdp.gamma = 0.5;
    mdp.epsilon = 0.0;
    mdp.action_embeddings = {{0.0}};
    mdp.transition = {1.0, 0.0, 0.0, 1.0};
    mdp.reward = {1.0, 1.0};
    mdp.rho = {0.5, 0.5};
    mdp.derive_neighborhoods();
    mdp.validate();
    return mdp;
}

}  // namespace

TEST_CASE("bellman backup with gamma 0 returns the reward table") {
    auto rng = rng_stream(1, 0);
    FiniteAAMdp mdp = random_mdp(rng, 6, 3, 2, 0.5, 0.0);
    QTable q = random_qtable(rng, 6, 3);
    TabularPolicy pi = random_policy(rng, 6, 3, false);
    QTable out = bellman_backup(q, pi, mdp);
    for (int s = 0; s < 6; ++s)
        for (int a = 0; a < 3; ++a) CHECK(out(s, a) == mdp.r(s, a));
}

TEST_CASE("bellman backup is a gamma contraction") {
    auto rng = rng_stream(2, 0);
    for (int trial = 0; trial < 100; ++trial) {
        FiniteAAMdp mdp = random_mdp(rng, 10, 3, 2, 0.0, 0.85);
        TabularPolicy pi = random_policy(rng, 10, 3, trial % 2 == 0);
        QTable q1 = random_qtable(rng, 10, 3);
        QTable q2 = random_qtable(rng, 10, 3);
        double lhs = sup_distance(bellman_backup(q1, pi, mdp), bellman_backup(q2, pi, mdp));
        CHECK(lhs <= mdp.gamma * sup_distance(q1, q2) + 1e-12);
    }
}

TEST_CASE("self-loop chain: fixed point 2, one backup from zero gives 1") {
    FiniteAAMdp mdp = self_loop_chain();
    TabularPolicy pi = TabularPolicy::make_deterministic({0, 0}, 1);
    QTable zero(2, 1);
    QTable once = bellman_backup(zero, pi, mdp);
    CHECK(once(0, 0) == doctest::Approx(1.0).epsilon(1e-14));

    // oracle: 100 manual applications approximate the geometric limit 1/(1-gamma)
    QTable q = zero;
    for (int i = 0; i < 100; ++i) q = bellman_backup(q, pi, mdp);
    CHECK(q(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(q(1, 0) == doctest::Approx(2.0).epsilon(1e-12));

    QTable eval = policy_evaluation(pi, mdp, 1e-10);
    CHECK(std::abs(eval(0, 0) - 2.0) < 1e-9);
    CHECK(std::abs(eval(1, 0) - 2.0) < 1e-9);
}

TEST_CASE("policy evaluation matches the linear-solve oracle") {
    auto rng = rng_stream(3, 0);
    for (int trial = 0; trial < 20; ++trial) {
        int S = 5 + static_cast<int>(rng() % 16);  // up to 20 states
        FiniteAAMdp mdp = random_mdp(rng, S, 3, 2, 0.0, 0.9);
        TabularPolicy pi = random_policy(rng, S, 3, trial % 2 == 0);
        QTable iterative = policy_evaluation(pi, mdp, 1e-12);
        QTable direct = linear_solve_evaluation(pi, mdp);
        CHECK(sup_distance(iterative, direct) < 1e-8);
    }
}

TEST_CASE("policy evaluation with gamma 0 converges to R in one sweep") {
    auto rng = rng_stream(4, 0);
    FiniteAAMdp mdp = random_mdp(rng, 5, 2, 1, 0.0, 0.0);
    TabularPolicy pi = random_policy(rng, 5, 2, true);
    QTable q = policy_evaluation(pi, mdp, 1e-10);
    for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 2; ++a) CHECK(q(s, a) == mdp.r(s, a));
}

TEST_CASE("greedy improvement picks argmax with lowest-index ties") {
    QTable q(2, 3);
    q(0, 0) = 1;
    q(0, 1) = 3;
    q(0, 2) = 2;
    q(1, 0) = 5;
    q(1, 1) = 5;
    q(1, 2) = 0;
    TabularPolicy pi = greedy_improve(q);
    CHECK(pi.action[0] == 1);
    CHECK(pi.action[1] == 0);  // tie broken to the lowest index
}

TEST_CASE("vanilla policy iteration finds the shortest path on the hazard gridworld") {
    HazardGridworld gw = make_hazard_gridworld(3, -50.0, 0.0);
    auto [pi, q] = policy_iteration(gw.mdp, 1e-10);
    // shortest path hugs the hazard row: go right along y = 1
    CHECK(pi.action[gw.state(0, 1)] == 0);
    CHECK(pi.action[gw.state(1, 1)] == 0);
}

TEST_CASE("monotone vanilla improvement across policy-iteration sweeps") {
    auto rng = rng_stream(5, 0);
    for (int trial = 0; trial < 20; ++trial) {
        FiniteAAMdp mdp = random_mdp(rng, 8, 3, 2, 0.0, 0.9);
        TabularPolicy pi = TabularPolicy::make_deterministic(std::vector<int>(8, 0), 3);
        std::vector<double> prev;
        for (int sweep = 0; sweep < 30; ++sweep) {
            QTable q = policy_evaluation(pi, mdp, 1e-12);
            std::vector<double> v = state_values(q, pi);
            if (!prev.empty())
                for (int s = 0; s < 8; ++s) CHECK(v[s] >= prev[s] - 1e-10);
            prev = std::move(v);
            TabularPolicy next = greedy_improve(q);
            if (next == pi) break;
            pi = next;
        }
    }
}

TEST_CASE("neighborhood invariants") {
    auto rng = rng_stream(6, 0);
    FiniteAAMdp mdp = random_mdp(rng, 4, 5, 2, 0.7);
    for (int a = 0; a < 5; ++a) {
        // exactly the epsilon-ball on embeddings, self always included
        for (int b = 0; b < 5; ++b) {
            bool in = std::binary_search(mdp.neighborhoods[a].begin(), mdp.neighborhoods[a].end(), b);
            CHECK(in == (mdp.embed_dist(a, b) <= mdp.epsilon + 1e-12));
        }
        CHECK(std::binary_search(mdp.neighborhoods[a].begin(), mdp.neighborhoods[a].end(), a));
    }
    mdp.epsilon = 0.0;
    mdp.derive_neighborhoods();
    for (int a = 0; a < 5; ++a) CHECK(mdp.neighborhoods[a] == std::vector<int>{a});
}

TEST_CASE("epsilon monotonicity of neighborhoods") {
    auto rng = rng_stream(7, 0);
    FiniteAAMdp mdp = random_mdp(rng, 3, 6, 2, 0.3);
    auto small = mdp.neighborhoods;
    mdp.epsilon = 0.9;
    mdp.derive_neighborhoods();
    for (int a = 0; a < 6; ++a)
        for (int b : small[a])
            CHECK(std::binary_search(mdp.neighborhoods[a].begin(), mdp.neighborhoods[a].end(), b));
}

TEST_CASE("dimension mismatches raise structured errors") {
    auto rng = rng_stream(8, 0);
    FiniteAAMdp mdp = random_mdp(rng, 4, 2, 1, 0.0);
    QTable wrong(3, 2);
    TabularPolicy pi = random_policy(rng, 4, 2, true);
    CHECK_THROWS_AS(bellman_backup(wrong, pi, mdp), DimensionError);
    QTable q(4, 3);
    CHECK_THROWS_AS(bellman_backup(q, pi, mdp), DimensionError);
    CHECK_THROWS_AS(policy_evaluation(pi, mdp, 0.0), ConfigError);
}

TEST_CASE("mdp json round trip preserves the model and rederives neighborhoods") {
    auto rng = rng_stream(9, 0);
    FiniteAAMdp mdp = random_mdp(rng, 5, 4, 2, 0.6);
    nlohmann::json j = mdp_to_json(mdp);
    FiniteAAMdp back = mdp_from_json(j);
    CHECK(back.transition == mdp.transition);
    CHECK(back.reward == mdp.reward);
    CHECK(back.rho == mdp.rho);
    CHECK(back.neighborhoods == mdp.neighborhoods);
    CHECK(!j.contains("neighborhoods"));  // derived, never stored
}

TEST_CASE("validate rejects broken rows") {
    auto rng = rng_stream(10, 0);
    FiniteAAMdp mdp = random_mdp(rng, 3, 2, 1, 0.0);
    mdp.transition[0] += 0.1;
    CHECK_THROWS_AS(mdp.validate(), ConfigError);
}
