#pragma once

#include "aapi/env.hpp"

namespace aapi {

/// 1-D double integrator, x'' = a. Quadratic cost per step, 200-step
/// episodes, start sampled uniformly in x with zero velocity.
class DoubleIntegratorEnv final : public Env {
public:
    static constexpr double kDt = 0.05;
    static constexpr int kMaxSteps = 200;

    int obs_dim() const override { return 2; }
    int act_dim() const override { return 1; }
    int max_episode_steps() const override { return kMaxSteps; }

    std::vector<double> reset(std::uint64_t seed) override {
        auto rng = rng_stream(seed, 0x64696e74);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        x_ = u(rng);
        v_ = 0.0;
        t_ = 0;
        done_ = false;
        return {x_, v_};
    }

    StepResult step(const std::vector<double>& action) override {
        if (done_) throw Error("double_integrator: step after episode end");
        double a = clip_action(action, 1)[0];
        v_ += a * kDt;
        x_ += v_ * kDt;
        ++t_;
        StepResult out;
        out.reward = -(x_ * x_ + 0.1 * v_ * v_ + 0.001 * a * a);
        out.done = done_ = (t_ >= kMaxSteps);
        out.obs = {x_, v_};
        return out;
    }

    std::unique_ptr<Env> clone() const override { return std::make_unique<DoubleIntegratorEnv>(); }

    // pin the state, e.g. to start an episode from a fixed position
    void set_state(double x, double v) {
        x_ = x;
        v_ = v;
        t_ = 0;
        done_ = false;
    }

private:
    double x_ = 0.0, v_ = 0.0;
    int t_ = 0;
    bool done_ = true;
};

}  // namespace aapi
