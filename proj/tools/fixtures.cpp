#include "fixtures.hpp"

#include "bvfilter/parallel.hpp"
#include "bvfilter/simulate.hpp"
#include "bvfilter/zakai.hpp"

#include <cmath>
#include <memory>

namespace bvfilter::fixtures {

namespace {

Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }
Eigen::VectorXd vec(double v) { return Eigen::VectorXd::Constant(1, v); }

ScenarioSpec base_1d(std::size_t steps) {
    ScenarioSpec spec;
    spec.m = spec.n = spec.d = 1;
    spec.time = TimeGrid(1.0, steps);
    spec.diffusion = std::make_shared<ConstantDiffusion>(scalar(1.0));
    spec.gamma = std::make_shared<ConstantNoise>(scalar(1.0));
    spec.y0 = vec(0.0);
    spec.seed = 1;
    return spec;
}

Eigen::MatrixXd subsample(const Eigen::MatrixXd& y, std::size_t factor) {
    Eigen::MatrixXd out(y.rows(), (y.cols() - 1) / static_cast<Eigen::Index>(factor) + 1);
    for (Eigen::Index k = 0; k < out.cols(); ++k) out.col(k) = y.col(k * static_cast<Eigen::Index>(factor));
    return out;
}

double terminal_mean(const Scenario& s, const Eigen::MatrixXd& y) {
    const ZakaiRun run = run_zakai(s, y);
    return run.mean(0, run.mean.cols() - 1);
}

ConvergenceStudy finish(std::vector<double> resolution, const std::vector<std::array<double, 3>>& means) {
    ConvergenceStudy out;
    out.resolution = std::move(resolution);
    double a = 0.0, b = 0.0;
    for (const auto& m : means) {
        a += (m[0] - m[1]) * (m[0] - m[1]);
        b += (m[1] - m[2]) * (m[1] - m[2]);
    }
    const auto n = static_cast<double>(means.size());
    out.rms_diff = {std::sqrt(a / n), std::sqrt(b / n)};
    out.order = std::log2(out.rms_diff[0] / out.rms_diff[1]);
    return out;
}

}  // namespace

ScenarioSpec ou(std::size_t steps) {
    ScenarioSpec spec = base_1d(steps);
    spec.drift = std::make_shared<AffineField>(scalar(-1.0), vec(0.0));
    spec.observation = std::make_shared<AffineField>(scalar(1.0), vec(0.0));
    spec.xi = InitialLaw::gaussian(vec(0.0), scalar(1.0));
    spec.nu = BVPath::zero(spec.time, 1);
    return spec;
}

ScenarioSpec linear_gaussian(std::size_t steps, std::size_t nodes) {
    ScenarioSpec spec = ou(steps);
    spec.space = SpatialGrid::uniform_1d(-10.0, 10.0, nodes);
    spec.nu = BVPath(spec.time, 1, {{0.4, vec(0.8)}, {0.7, vec(-0.5)}}, {{1.0, vec(0.3)}}, 2.0);
    return spec;
}

ScenarioSpec nonlinear(std::size_t steps, std::size_t nodes) {
    ScenarioSpec spec = base_1d(steps);
    spec.space = SpatialGrid::uniform_1d(-6.0, 6.0, nodes);
    spec.drift = std::make_shared<ClippedCubicField>(1, 1.0, 4.0);
    spec.observation = std::make_shared<TanhField>(1, 1.0, 1.0);
    spec.gamma = std::make_shared<ConstantNoise>(scalar(0.5));
    spec.xi = InitialLaw::gaussian(vec(0.5), scalar(0.25));
    spec.nu = BVPath(spec.time, 1, {{0.25, vec(0.75)}, {0.625, vec(-0.5625)}}, {}, 2.0);
    spec.drift_bound = 4.0;
    spec.diffusion_bound = 1.0;
    spec.observation_bound = 1.0;
    return spec;
}

ScenarioSpec without_observation(ScenarioSpec spec) {
    spec.observation = std::make_shared<ZeroField>(spec.m, spec.n);
    spec.observation_bound.reset();
    return spec;
}

ConvergenceStudy time_convergence(const ScenarioSpec& base, std::size_t coarse_steps,
                                  const std::vector<std::uint64_t>& seeds, unsigned jobs) {
    const double horizon = base.time.horizon();
    const Scenario fine = Scenario(base).with_time_grid(TimeGrid(horizon, 4 * coarse_steps));
    std::vector<std::array<double, 3>> means(seeds.size());
    parallel_for(seeds.size(), jobs, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const PathBundle b = simulate_bundle(fine, Measure::Physical, RngStream(seeds[i], 0));
            for (std::size_t level = 0; level < 3; ++level) {
                const std::size_t factor = std::size_t{4} >> level;
                const Scenario s = fine.with_time_grid(TimeGrid(horizon, coarse_steps << level));
                means[i][level] = terminal_mean(s, subsample(b.y, factor));
            }
        }
    });
    const double dt = horizon / static_cast<double>(coarse_steps);
    return finish({dt, dt / 2.0}, means);
}

ConvergenceStudy space_convergence(const ScenarioSpec& base, std::size_t coarse_nodes,
                                   const std::vector<std::uint64_t>& seeds, unsigned jobs) {
    const Scenario s0 = Scenario(base);
    const SpatialGrid g0 = SpatialGrid::uniform_1d(s0.space().lower(0), s0.space().upper(0), coarse_nodes);
    const std::array<SpatialGrid, 3> grids{g0, g0.refined(), g0.refined().refined()};
    std::vector<std::array<double, 3>> means(seeds.size());
    parallel_for(seeds.size(), jobs, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const PathBundle b = simulate_bundle(s0, Measure::Physical, RngStream(seeds[i], 0));
            for (std::size_t level = 0; level < 3; ++level) means[i][level] = terminal_mean(s0.with_space(grids[level]), b.y);
        }
    });
    return finish({g0.spacing(0), g0.spacing(0) / 2.0}, means);
}

}  // namespace bvfilter::fixtures
