#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "aapi/common.hpp"

namespace aapi {

/// Row-major dense tensor of doubles.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(numel_of(shape)), 0.0);
    }
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != static_cast<std::size_t>(numel_of(shape)))
            throw DimensionError("tensor: data length does not match shape");
    }

    static long numel_of(const std::vector<int>& s) {
        long n = 1;
        for (int d : s) n *= d;
        return n;
    }
    long numel() const { return static_cast<long>(data.size()); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    void check_finite(const char* who) const {
        for (double v : data)
            if (!std::isfinite(v)) throw NumericError(std::string(who) + ": non-finite tensor entry");
    }
};

}  // namespace aapi
