#pragma once

#include "bvfilter/scenario.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace bvfilter::fixtures {

/// b = -x, σ = 1, h = x, γ = 1, ξ = N(0, 1), ν = 0, T = 1.
ScenarioSpec ou(std::size_t steps = 1000);

/// OU with ν^c slope 0.3, jumps +0.8 at 0.4 and -0.5 at 0.7, grid [-10, 10].
ScenarioSpec linear_gaussian(std::size_t steps = 10000, std::size_t nodes = 1024);

/// b = clip(-x³, ±4), σ = 1, h = tanh x, γ = 0.5, jumps +0.75 at 0.25 and
/// -0.5625 at 0.625, grid [-6, 6]. Jump times are nodes whenever steps is a
/// multiple of 8 and jump sizes are whole cells for 65 nodes and finer.
ScenarioSpec nonlinear(std::size_t steps, std::size_t nodes);

/// Any of the above with h ≡ 0.
ScenarioSpec without_observation(ScenarioSpec spec);

struct ConvergenceStudy {
    std::vector<double> resolution;  // Δt or Δx of the coarse level in each pair
    std::vector<double> rms_diff;    // RMS over seeds of |mean_T(level) - mean_T(next level)|
    double order = 0.0;              // log2(rms_diff[0] / rms_diff[1])
};

/// Normalized Zakai mean at T on steps, 2 steps, 4 steps (fixed grid), with Y
/// simulated on the finest time grid and subsampled.
ConvergenceStudy time_convergence(const ScenarioSpec& base, std::size_t coarse_steps,
                                  const std::vector<std::uint64_t>& seeds, unsigned jobs = 1);

/// Same with the grid refined twice at a fixed time step.
ConvergenceStudy space_convergence(const ScenarioSpec& base, std::size_t coarse_nodes,
                                   const std::vector<std::uint64_t>& seeds, unsigned jobs = 1);

}  // namespace bvfilter::fixtures
