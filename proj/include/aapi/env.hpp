#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "aapi/common.hpp"

namespace aapi {

struct StepResult {
    std::vector<double> obs;
    double reward = 0.0;
    bool done = false;
};

/// Environment contract: box actions in [-1,1]^d (clipped before dynamics),
/// deterministic trajectories for a given seed and action sequence, and a
/// rejected step once the episode is done.
class Env {
public:
    virtual ~Env() = default;
    virtual int obs_dim() const = 0;
    virtual int act_dim() const = 0;
    virtual int max_episode_steps() const = 0;
    virtual std::vector<double> reset(std::uint64_t seed) = 0;
    virtual StepResult step(const std::vector<double>& action) = 0;
    virtual std::unique_ptr<Env> clone() const = 0;
};

inline std::vector<double> clip_action(const std::vector<double>& a, int dim) {
    if (static_cast<int>(a.size()) != dim) throw DimensionError("env: action dimension mismatch");
    std::vector<double> out(a);
    for (double& x : out) x = clamp(x, -1.0, 1.0);
    return out;
}

}  // namespace aapi
