#pragma once

#include <vector>

#include "aapi/common.hpp"

namespace aapi {

struct SurgeryResult {
    std::vector<double> combined;
    bool conflicted = false;
};

/// Convex combination of two objective gradients; when they point against
/// each other (negative inner product) each is first projected onto the
/// other's normal plane.
inline SurgeryResult gradient_surgery_combine(const std::vector<double>& g_q,
                                              const std::vector<double>& g_adv, double omega) {
    if (g_q.size() != g_adv.size()) throw DimensionError("gradient surgery: shape mismatch");
    if (omega < 0.0 || omega > 1.0) throw ConfigError("gradient surgery: omega outside [0,1]");
    const std::size_t n = g_q.size();
    double dot = 0.0, nq = 0.0, nadv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dot += g_q[i] * g_adv[i];
        nq += g_q[i] * g_q[i];
        nadv += g_adv[i] * g_adv[i];
    }
    SurgeryResult out;
    out.combined.assign(n, 0.0);
    if (nq == 0.0 && nadv == 0.0) return out;
    if (dot >= 0.0 || nq == 0.0 || nadv == 0.0) {
        for (std::size_t i = 0; i < n; ++i) out.combined[i] = omega * g_q[i] + (1.0 - omega) * g_adv[i];
        return out;
    }
    out.conflicted = true;
    const double cq = dot / nadv;   // g_q onto g_adv
    const double cadv = dot / nq;   // g_adv onto g_q
    for (std::size_t i = 0; i < n; ++i) {
        double pq = g_q[i] - cq * g_adv[i];
        double padv = g_adv[i] - cadv * g_q[i];
        out.combined[i] = omega * pq + (1.0 - omega) * padv;
    }
    return out;
}

}  // namespace aapi
