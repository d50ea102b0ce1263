#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "aapi/common.hpp"
#include "aapi/tensor.hpp"

namespace aapi {

enum class Activation { Tanh, Relu, Identity };

inline std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Identity: return "identity";
    }
    return "identity";
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "identity") return Activation::Identity;
    throw ConfigError("unknown activation tag '" + s + "'");
}

/// Small fully-connected network. Parameters live in one flat vector
/// (per layer: weights row-major out x in, then biases), so the flat view
/// and the layer views alias the same storage exactly.
struct DenseNet {
    std::vector<int> sizes;             // [in, h1, ..., out]
    std::vector<Activation> acts;       // one per layer
    std::vector<double> params;         // flat theta
    std::vector<std::size_t> w_offset;  // per layer
    std::vector<std::size_t> b_offset;

    int n_layers() const { return static_cast<int>(acts.size()); }
    int input_size() const { return sizes.front(); }
    int output_size() const { return sizes.back(); }

    static DenseNet make(std::vector<int> sizes, std::vector<Activation> acts) {
        if (sizes.size() < 2 || acts.size() != sizes.size() - 1)
            throw ConfigError("dense net: need one activation per layer");
        DenseNet net;
        net.sizes = std::move(sizes);
        net.acts = std::move(acts);
        std::size_t total = 0;
        for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
            net.w_offset.push_back(total);
            total += static_cast<std::size_t>(net.sizes[l]) * net.sizes[l + 1];
            net.b_offset.push_back(total);
            total += net.sizes[l + 1];
        }
        net.params.assign(total, 0.0);
        return net;
    }

    /// Uniform fan-in scaled init.
    void init(std::mt19937_64& rng) {
        for (int l = 0; l < n_layers(); ++l) {
            double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
            std::uniform_real_distribution<double> u(-bound, bound);
            std::size_t count = static_cast<std::size_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
            for (std::size_t i = 0; i < count; ++i) params[w_offset[l] + i] = u(rng);
        }
    }
};

/// Forward record, consumed exactly once by backward.
struct Tape {
    int batch = 0;
    std::vector<double> input;              // (batch, in)
    std::vector<std::vector<double>> pre;   // pre-activation per layer
    std::vector<std::vector<double>> post;  // activation output per layer
    bool consumed = false;
};

inline double apply_act(Activation a, double x) {
    switch (a) {
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Identity: return x;
    }
    return x;
}

/// x: (batch, in) or (in). Returns (batch, out) or (out) respectively.
inline Tensor forward(const DenseNet& net, const Tensor& x, Tape* tape = nullptr) {
    const int in = net.input_size();
    int batch = 1;
    bool batched = false;
    if (x.shape.size() == 1) {
        if (x.shape[0] != in) throw DimensionError("forward: input size mismatch");
    } else if (x.shape.size() == 2) {
        if (x.shape[1] != in) throw DimensionError("forward: input size mismatch");
        batch = x.shape[0];
        batched = true;
    } else {
        throw DimensionError("forward: expected rank-1 or rank-2 input");
    }

    if (tape) {
        tape->batch = batch;
        tape->input = x.data;
        tape->pre.assign(net.n_layers(), {});
        tape->post.assign(net.n_layers(), {});
        tape->consumed = false;
    }
    std::vector<double> cur = x.data;
    for (int l = 0; l < net.n_layers(); ++l) {
        const int ni = net.sizes[l], no = net.sizes[l + 1];
        const double* W = &net.params[net.w_offset[l]];
        const double* b = &net.params[net.b_offset[l]];
        std::vector<double> pre(static_cast<std::size_t>(batch) * no);
        for (int n = 0; n < batch; ++n) {
            const double* xin = &cur[static_cast<std::size_t>(n) * ni];
            double* out = &pre[static_cast<std::size_t>(n) * no];
            for (int j = 0; j < no; ++j) {
                const double* wrow = &W[static_cast<std::size_t>(j) * ni];
                double acc = b[j];
                for (int i = 0; i < ni; ++i) acc += wrow[i] * xin[i];
                out[j] = acc;
            }
        }
        std::vector<double> post(pre.size());
        for (std::size_t i = 0; i < pre.size(); ++i) post[i] = apply_act(net.acts[l], pre[i]);
        if (tape) {
            tape->pre[l] = pre;
            tape->post[l] = post;
        }
        cur = std::move(post);
    }
    return batched ? Tensor({batch, net.output_size()}, std::move(cur))
                   : Tensor({net.output_size()}, std::move(cur));
}

struct Gradients {
    std::vector<double> params;  // flat, same layout as DenseNet::params
    Tensor input;                // same shape convention as the forward input
};

/// Exact reverse-mode gradients of <upstream, y> with respect to theta and x.
/// Set want_params = false to skip the parameter gradients (the input-only
/// path is what PGD needs and costs about half as much).
inline Gradients backward(const DenseNet& net, Tape& tape, const Tensor& upstream,
                          bool want_params = true) {
    if (tape.consumed) throw Error("backward: tape already consumed; rerun forward first");
    tape.consumed = true;
    if (upstream.numel() != static_cast<long>(tape.batch) * net.output_size())
        throw DimensionError("backward: upstream shape does not match forward output");

    const int batch = tape.batch;
    Gradients g;
    if (want_params) g.params.assign(net.params.size(), 0.0);
    std::vector<double> delta = upstream.data;  // gradient wrt layer output
    for (int l = net.n_layers() - 1; l >= 0; --l) {
        const int ni = net.sizes[l], no = net.sizes[l + 1];
        const double* W = &net.params[net.w_offset[l]];
        // through the activation
        for (int n = 0; n < batch; ++n)
            for (int j = 0; j < no; ++j) {
                std::size_t idx = static_cast<std::size_t>(n) * no + j;
                switch (net.acts[l]) {
                    case Activation::Tanh: {
                        double y = tape.post[l][idx];
                        delta[idx] *= 1.0 - y * y;
                        break;
                    }
                    case Activation::Relu:
                        if (tape.pre[l][idx] <= 0.0) delta[idx] = 0.0;
                        break;
                    case Activation::Identity: break;
                }
            }
        const std::vector<double>& below = l == 0 ? tape.input : tape.post[l - 1];
        if (want_params) {
            double* gW = &g.params[net.w_offset[l]];
            double* gb = &g.params[net.b_offset[l]];
            for (int n = 0; n < batch; ++n) {
                const double* xin = &below[static_cast<std::size_t>(n) * ni];
                const double* d = &delta[static_cast<std::size_t>(n) * no];
                for (int j = 0; j < no; ++j) {
                    gb[j] += d[j];
                    double* grow = &gW[static_cast<std::size_t>(j) * ni];
                    for (int i = 0; i < ni; ++i) grow[i] += d[j] * xin[i];
                }
            }
        }
        std::vector<double> next(static_cast<std::size_t>(batch) * ni, 0.0);
        for (int n = 0; n < batch; ++n) {
            const double* d = &delta[static_cast<std::size_t>(n) * no];
            double* out = &next[static_cast<std::size_t>(n) * ni];
            for (int j = 0; j < no; ++j) {
                const double* wrow = &W[static_cast<std::size_t>(j) * ni];
                for (int i = 0; i < ni; ++i) out[i] += d[j] * wrow[i];
            }
        }
        delta = std::move(next);
    }
    g.input = batch > 1 || tape.input.size() != static_cast<std::size_t>(net.input_size())
                  ? Tensor({batch, net.input_size()}, std::move(delta))
                  : Tensor({net.input_size()}, std::move(delta));
    return g;
}

/// Bias-corrected adaptive-moment update state for one parameter vector.
struct AdamState {
    std::vector<double> m, v;
    long step = 0;
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_num = 1e-8;
    std::string label = "theta";

    static AdamState make(std::size_t n, double lr, std::string label = "theta") {
        AdamState s;
        s.m.assign(n, 0.0);
        s.v.assign(n, 0.0);
        s.lr = lr;
        s.label = std::move(label);
        return s;
    }
};

/// In-place Adam step: theta <- theta - lr * mhat / (sqrt(vhat) + eps).
inline void adam_step(std::vector<double>& theta, const std::vector<double>& grad, AdamState& st) {
    if (theta.size() != grad.size() || theta.size() != st.m.size())
        throw DimensionError("adam_step: parameter/gradient/moment size mismatch for " + st.label);
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!std::isfinite(grad[i]))
            throw NumericError("adam_step: non-finite gradient in block '" + st.label + "' at index " +
                               std::to_string(i));
    ++st.step;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
        theta[i] -= st.lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + st.eps_num);
    }
}

// --- Checkpoint fragment ---

inline nlohmann::json net_to_json(const DenseNet& net) {
    nlohmann::json j;
    j["layer_sizes"] = net.sizes;
    std::vector<std::string> tags;
    for (Activation a : net.acts) tags.push_back(activation_name(a));
    j["activations"] = tags;
    j["params"] = net.params;
    return j;
}

inline DenseNet net_from_json(const nlohmann::json& j) {
    std::vector<int> sizes = j.at("layer_sizes").get<std::vector<int>>();
    std::vector<Activation> acts;
    for (const auto& tag : j.at("activations")) acts.push_back(activation_from_name(tag.get<std::string>()));
    DenseNet net = DenseNet::make(std::move(sizes), std::move(acts));
    std::vector<double> params = j.at("params").get<std::vector<double>>();
    if (params.size() != net.params.size()) throw ConfigError("net json: parameter count mismatch");
    net.params = std::move(params);
    return net;
}

}  // namespace aapi
