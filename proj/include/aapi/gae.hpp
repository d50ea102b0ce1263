#pragma once

#include <vector>

#include "aapi/common.hpp"

namespace aapi {

struct GaeResult {
    std::vector<double> advantages;
    std::vector<double> returns_to_go;  // advantages + values
};

/// Generalized advantage estimation over one collected segment.
/// `values` carries one extra entry: the bootstrap value of the state
/// after the last step (ignored when that step terminated).
inline GaeResult gae_advantages(const std::vector<double>& rewards, const std::vector<double>& values,
                                const std::vector<bool>& dones, double gamma, double lambda) {
    const std::size_t T = rewards.size();
    if (dones.size() != T || values.size() != T + 1)
        throw DimensionError("gae: need |rewards| = |dones| = |values| - 1");
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("gae: lambda outside [0,1]");
    GaeResult out;
    out.advantages.assign(T, 0.0);
    out.returns_to_go.assign(T, 0.0);
    double acc = 0.0;
    for (std::size_t t = T; t-- > 0;) {
        double not_done = dones[t] ? 0.0 : 1.0;
        double delta = rewards[t] + gamma * values[t + 1] * not_done - values[t];
        acc = delta + gamma * lambda * not_done * acc;
        out.advantages[t] = acc;
        out.returns_to_go[t] = acc + values[t];
    }
    return out;
}

}  // namespace aapi
