#pragma once

#include <queue>
#include <vector>

#include "aapi/mdp.hpp"

namespace aapi {

/// Cell roles in the hazard gridworld. State index is y * n + x with y = 0
/// the hazard row at the bottom.
enum class GridCell { Free, Hazard, Goal };

struct HazardGridworld {
    FiniteAAMdp mdp;
    int n = 0;
    int start_state = 0;
    int goal_state = 0;
    std::vector<GridCell> cell;  // per state

    int state(int x, int y) const { return y * n + x; }
};

/// n x n grid with four unit moves embedded at (+-1,0),(0,+-1). The bottom
/// row is a hazard strip adjacent to the shortest start-goal path along row
/// one; falling in costs hazard_penalty and absorbs. Step reward -1, goal
/// absorbing with reward 0. With eps = 1 the adversary can turn a
/// hazard-hugging move into a fall-in move.
inline HazardGridworld make_hazard_gridworld(int n, double hazard_penalty, double eps,
                                             double gamma = 0.95) {
    if (n < 3) throw ConfigError("hazard_gridworld: n must be >= 3");
    HazardGridworld gw;
    gw.n = n;
    const int S = n * n;
    gw.cell.assign(S, GridCell::Free);
    for (int x = 0; x < n; ++x) gw.cell[gw.state(x, 0)] = GridCell::Hazard;
    gw.start_state = gw.state(0, 1);
    gw.goal_state = gw.state(n - 1, 1);
    gw.cell[gw.goal_state] = GridCell::Goal;

    FiniteAAMdp& m = gw.mdp;
    m.n_states = S;
    m.gamma = gamma;
    m.epsilon = eps;
    m.action_embeddings = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};  // right, up, left, down
    const int A = 4;
    const int dx[A] = {1, 0, -1, 0};
    const int dy[A] = {0, 1, 0, -1};
    m.transition.assign(static_cast<std::size_t>(S) * A * S, 0.0);
    m.reward.assign(static_cast<std::size_t>(S) * A, 0.0);
    m.rho.assign(S, 0.0);
    m.rho[gw.start_state] = 1.0;

    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            int s = gw.state(x, y);
            for (int a = 0; a < A; ++a) {
                int next = s;
                double r = 0.0;
                if (gw.cell[s] == GridCell::Free) {
                    int nx = x + dx[a], ny = y + dy[a];
                    if (nx >= 0 && nx < n && ny >= 0 && ny < n) next = gw.state(nx, ny);
                    switch (gw.cell[next]) {
                        case GridCell::Hazard: r = hazard_penalty; break;
                        case GridCell::Goal: r = 0.0; break;
                        case GridCell::Free: r = -1.0; break;
                    }
                }
                // hazard and goal states absorb with reward 0
                m.transition[(static_cast<std::size_t>(s) * A + a) * S + next] = 1.0;
                m.reward[static_cast<std::size_t>(s) * A + a] = r;
            }
        }
    m.derive_neighborhoods();
    m.validate();

    // reachability sanity: a free path from start to goal must exist
    std::vector<bool> seen(S, false);
    std::queue<int> frontier;
    frontier.push(gw.start_state);
    seen[gw.start_state] = true;
    while (!frontier.empty()) {
        int s = frontier.front();
        frontier.pop();
        int x = s % n, y = s / n;
        for (int a = 0; a < A; ++a) {
            int nx = x + dx[a], ny = y + dy[a];
            if (nx < 0 || nx >= n || ny < 0 || ny >= n) continue;
            int t = gw.state(nx, ny);
            if (seen[t] || gw.cell[t] == GridCell::Hazard) continue;
            seen[t] = true;
            frontier.push(t);
        }
    }
    if (!seen[gw.goal_state]) throw ConfigError("hazard_gridworld: no hazard-free path from start to goal");
    return gw;
}

}  // namespace aapi
