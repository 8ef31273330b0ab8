#pragma once

#include "bvfilter/scenario.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <string>

namespace test {

using namespace bvfilter;

inline Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }
inline Eigen::VectorXd vec(double v) { return Eigen::VectorXd::Constant(1, v); }

/// Scalar linear scenario dX = (aX + c) dt + s dW + dν, dY = (hX + g) dt + γ dB.
struct Linear1D {
    double a = 0.0, c = 0.0, s = 1.0, h = 1.0, g = 0.0, gamma = 1.0;
    double mean0 = 0.0, var0 = 1.0;
    double horizon = 1.0;
    std::size_t steps = 100;
    std::vector<Jump> jumps;
    std::vector<Knot> knots;
    double fuel = 5.0;
    double lower = -8.0, upper = 8.0;
    std::size_t nodes = 0;  // 0: no spatial grid
    std::uint64_t seed = 1;

    ScenarioSpec spec() const {
        ScenarioSpec sp;
        sp.m = sp.n = sp.d = 1;
        sp.time = TimeGrid(horizon, steps);
        if (nodes > 0) sp.space = SpatialGrid::uniform_1d(lower, upper, nodes);
        sp.drift = std::make_shared<AffineField>(scalar(a), vec(c));
        sp.diffusion = std::make_shared<ConstantDiffusion>(scalar(s));
        if (h == 0.0 && g == 0.0) sp.observation = std::make_shared<ZeroField>(1, 1);
        else sp.observation = std::make_shared<AffineField>(scalar(h), vec(g));
        sp.gamma = std::make_shared<ConstantNoise>(scalar(gamma));
        sp.xi = InitialLaw::gaussian(vec(mean0), scalar(var0));
        sp.nu = BVPath(sp.time, 1, jumps, knots, fuel);
        sp.y0 = vec(0.0);
        sp.seed = seed;
        return sp;
    }

    Scenario scenario() const { return Scenario(spec()); }
};

/// Discrete Gaussian density on the nodes of a 1-D grid, unnormalized.
inline Eigen::VectorXd gaussian_nodes(const SpatialGrid& grid, double mean, double var) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double x = grid.coordinate(0, j) - mean;
        v[static_cast<Eigen::Index>(j)] = std::exp(-x * x / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
    }
    return v;
}

inline bool contains(const std::string& text, const std::string& part) { return text.find(part) != std::string::npos; }

}  // namespace test
