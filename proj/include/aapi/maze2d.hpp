#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "aapi/env.hpp"

namespace aapi {

/// Point-mass maze. Layouts are plain-text grids: '#' wall, '.' free,
/// 'S' start, 'G' goal.
struct Maze2dSpec {
    std::vector<std::vector<bool>> wall;  // wall[row][col], row 0 at the bottom
    int start_col = 0, start_row = 0;
    double goal_x = 0.0, goal_y = 0.0;
    double goal_radius = 0.5;
    double velocity_cap = 5.0;
    double force_scale = 1.0;
    double dt = 0.05;
    double goal_reward = 200.0;
    int max_steps = 300;

    int rows() const { return static_cast<int>(wall.size()); }
    int cols() const { return wall.empty() ? 0 : static_cast<int>(wall[0].size()); }

    bool is_wall(double x, double y) const {
        int c = static_cast<int>(std::floor(x));
        int r = static_cast<int>(std::floor(y));
        if (c < 0 || r < 0 || c >= cols() || r >= rows()) return true;
        return wall[r][c];
    }

    void validate() const {
        if (rows() < 3 || cols() < 3) throw ConfigError("maze2d: layout too small");
        if (wall[start_row][start_col]) throw ConfigError("maze2d: start lies in a wall cell");
        if (is_wall(goal_x, goal_y)) throw ConfigError("maze2d: goal lies in a wall cell");
        if (goal_radius <= 0.0 || velocity_cap <= 0.0) throw ConfigError("maze2d: radius and cap must be positive");
    }
};

/// First line in the text is the top row of the maze.
inline Maze2dSpec parse_maze_layout(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) lines.push_back(line);
    if (lines.empty()) throw ConfigError("maze2d: empty layout");
    Maze2dSpec spec;
    const int rows = static_cast<int>(lines.size());
    spec.wall.assign(rows, {});
    bool has_start = false, has_goal = false;
    for (int r = 0; r < rows; ++r) {
        const std::string& line = lines[rows - 1 - r];  // bottom row first
        spec.wall[r].resize(line.size());
        for (int c = 0; c < static_cast<int>(line.size()); ++c) {
            char ch = line[c];
            spec.wall[r][c] = (ch == '#');
            if (ch == 'S') {
                spec.start_col = c;
                spec.start_row = r;
                has_start = true;
            } else if (ch == 'G') {
                spec.goal_x = c + 0.5;
                spec.goal_y = r + 0.5;
                has_goal = true;
            } else if (ch != '#' && ch != '.') {
                throw ConfigError(std::string("maze2d: unknown layout character '") + ch + "'");
            }
        }
    }
    if (!has_start || !has_goal) throw ConfigError("maze2d: layout needs one 'S' and one 'G'");
    spec.validate();
    return spec;
}

/// U-shaped corridor: up from the start, across the top, down to the goal.
inline Maze2dSpec default_maze_spec() {
    return parse_maze_layout(
        "#######\n"
        "#.....#\n"
        "#.###.#\n"
        "#S###G#\n"
        "#######\n");
}

/// Semi-implicit Euler point mass with axis-separated wall collision.
class Maze2dEnv final : public Env {
public:
    explicit Maze2dEnv(Maze2dSpec spec = default_maze_spec()) : spec_(std::move(spec)) { spec_.validate(); }

    int obs_dim() const override { return 4; }
    int act_dim() const override { return 2; }
    int max_episode_steps() const override { return spec_.max_steps; }

    std::vector<double> reset(std::uint64_t seed) override {
        auto rng = rng_stream(seed, 0x6d617a65);
        std::uniform_real_distribution<double> u(-0.1, 0.1);
        px_ = spec_.start_col + 0.5 + u(rng);
        py_ = spec_.start_row + 0.5 + u(rng);
        vx_ = vy_ = 0.0;
        t_ = 0;
        done_ = false;
        return obs();
    }

    StepResult step(const std::vector<double>& action) override {
        if (done_) throw Error("maze2d: step after episode end");
        std::vector<double> a = clip_action(action, 2);
        const double cap = spec_.velocity_cap;
        vx_ = clamp(vx_ + spec_.force_scale * a[0] * spec_.dt, -cap, cap);
        vy_ = clamp(vy_ + spec_.force_scale * a[1] * spec_.dt, -cap, cap);
        move_axis(px_, vx_, py_, true);
        move_axis(py_, vy_, px_, false);
        ++t_;
        StepResult out;
        double dx = px_ - spec_.goal_x, dy = py_ - spec_.goal_y;
        bool at_goal = std::sqrt(dx * dx + dy * dy) < spec_.goal_radius;
        out.reward = at_goal ? spec_.goal_reward : 0.0;
        out.done = done_ = at_goal || t_ >= spec_.max_steps;
        out.obs = obs();
        return out;
    }

    std::unique_ptr<Env> clone() const override { return std::make_unique<Maze2dEnv>(spec_); }

    const Maze2dSpec& spec() const { return spec_; }
    void set_state(double x, double y, double vx, double vy) {
        px_ = x;
        py_ = y;
        vx_ = vx;
        vy_ = vy;
        t_ = 0;
        done_ = false;
    }

private:
    static constexpr double kEdge = 1e-9;

    std::vector<double> obs() const { return {px_, py_, vx_, vy_}; }

    // Advance one coordinate; on wall contact, park at the cell edge and
    // zero the violating velocity component.
    void move_axis(double& pos, double& vel, double other, bool horizontal) {
        double next = pos + vel * spec_.dt;
        double x = horizontal ? next : other;
        double y = horizontal ? other : next;
        if (!spec_.is_wall(x, y)) {
            pos = next;
            return;
        }
        if (vel > 0.0)
            pos = std::floor(next) - kEdge;
        else if (vel < 0.0)
            pos = std::floor(next) + 1.0 + kEdge;
        vel = 0.0;
    }

    Maze2dSpec spec_;
    double px_ = 0.0, py_ = 0.0, vx_ = 0.0, vy_ = 0.0;
    int t_ = 0;
    bool done_ = true;
};

}  // namespace aapi
