#pragma once

#include <cmath>
#include <vector>

#include "aapi/common.hpp"
#include "aapi/net.hpp"

namespace aapi {

/// Signed-gradient descent on delta for a critic taking concat(s, a).
/// Each row of `s`/`a` is attacked independently; one network pass per
/// iteration covers the whole batch. Returns one delta row per sample,
/// the best visited iterate (delta = 0 included) under the critic value,
/// with the executed action clipped to the unit box before evaluation.
inline std::vector<std::vector<double>> pgd_min_delta_batch(const DenseNet& q_net,
                                                            const std::vector<std::vector<double>>& s,
                                                            const std::vector<std::vector<double>>& a,
                                                            double eps, int K, double eta) {
    if (s.size() != a.size()) throw DimensionError("pgd: state/action batch size mismatch");
    const int n = static_cast<int>(s.size());
    if (n == 0) return {};
    const int sd = static_cast<int>(s[0].size());
    const int ad = static_cast<int>(a[0].size());
    if (q_net.input_size() != sd + ad || q_net.output_size() != 1)
        throw DimensionError("pgd: critic must map concat(state, action) to a scalar");
    if (K < 1) throw ConfigError("pgd: need at least one iteration");

    std::vector<std::vector<double>> best(n, std::vector<double>(ad, 0.0));
    if (eps == 0.0) return best;

    auto evaluate = [&](const std::vector<std::vector<double>>& delta, Tape* tape) {
        Tensor x({n, sd + ad});
        for (int i = 0; i < n; ++i) {
            double* row = &x.data[static_cast<std::size_t>(i) * (sd + ad)];
            for (int j = 0; j < sd; ++j) row[j] = s[i][j];
            for (int j = 0; j < ad; ++j) row[sd + j] = clamp(a[i][j] + delta[i][j], -1.0, 1.0);
        }
        return forward(q_net, x, tape);
    };

    std::vector<std::vector<double>> delta = best;
    Tensor q0 = evaluate(delta, nullptr);
    std::vector<double> best_q(q0.data.begin(), q0.data.end());

    for (int k = 0; k < K; ++k) {
        Tape tape;
        evaluate(delta, &tape);
        Tensor up({n, 1});
        for (int i = 0; i < n; ++i) up[i] = 1.0;
        Gradients g = backward(q_net, tape, up, /*want_params=*/false);
        for (int i = 0; i < n; ++i) {
            const double* grow = &g.input.data[static_cast<std::size_t>(i) * (sd + ad) + sd];
            for (int j = 0; j < ad; ++j) {
                double step = grow[j] > 0.0 ? eta : (grow[j] < 0.0 ? -eta : 0.0);
                delta[i][j] = clamp(delta[i][j] - step, -eps, eps);
            }
        }
        Tensor q = evaluate(delta, nullptr);
        for (int i = 0; i < n; ++i)
            if (q[i] < best_q[i]) {
                best_q[i] = q[i];
                best[i] = delta[i];
            }
    }
    return best;
}

inline std::vector<double> pgd_min_delta(const DenseNet& q_net, const std::vector<double>& s,
                                         const std::vector<double>& a, double eps, int K, double eta) {
    return pgd_min_delta_batch(q_net, {s}, {a}, eps, K, eta)[0];
}

}  // namespace aapi
