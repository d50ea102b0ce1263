#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "aapi/common.hpp"

namespace aapi {

struct Transition {
    std::vector<double> s;
    std::vector<double> a;  // already clipped to [-1,1]^d
    double r = 0.0;
    std::vector<double> s_next;
    bool done = false;
};

/// Fixed-capacity ring with uniform sampling over current contents.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw ConfigError("replay buffer: capacity must be positive");
        store_.reserve(capacity);
    }

    void push(Transition t) {
        for (double v : t.s)
            if (!std::isfinite(v)) throw NumericError("replay buffer: non-finite observation");
        for (double v : t.a)
            if (!std::isfinite(v) || std::abs(v) > 1.0 + 1e-12)
                throw NumericError("replay buffer: action outside the unit box");
        if (!std::isfinite(t.r)) throw NumericError("replay buffer: non-finite reward");
        if (store_.size() < capacity_) {
            store_.push_back(std::move(t));
        } else {
            store_[head_] = std::move(t);
        }
        head_ = (head_ + 1) % capacity_;
    }

    std::size_t size() const { return store_.size(); }
    const Transition& operator[](std::size_t i) const { return store_[i]; }

    std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64& rng) const {
        if (store_.empty()) throw ConfigError("replay buffer: sampling from an empty buffer");
        std::uniform_int_distribution<std::size_t> u(0, store_.size() - 1);
        std::vector<std::size_t> idx(n);
        for (std::size_t& i : idx) i = u(rng);
        return idx;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> store_;
};

}  // namespace aapi
