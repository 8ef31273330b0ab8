#pragma once

#include "bvfilter/rng.hpp"
#include "bvfilter/scenario.hpp"
#include "bvfilter/types.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

namespace bvfilter {

/// Particles sharing one random substream within a step. Fixed, so results do
/// not depend on how particles are split across workers.
inline constexpr std::size_t kParticleChunk = 64;

/// N draws from ξ (particle i from rng.substream(i)), uniform weights, then Δν_0.
ParticleCloud pf_init(const Scenario& s, std::size_t particles, const RngStream& rng);

/// Weight by the discrete Girsanov factor at the current positions, then take
/// one Euler step with Δν^c_k and the jump at t_{k+1}, if any. Consumes one
/// 64-bit key from `rng`; particle noise comes from substreams of that key.
ParticleCloud pf_step(const ParticleCloud& cloud, const Scenario& s, double t_k,
                      const Eigen::Ref<const Eigen::VectorXd>& dy, RngStream& rng, unsigned jobs = 1);

/// 1 / Σ w_i² of the normalized weights.
double effective_sample_size(const ParticleCloud& cloud);

/// log of (1/N) Σ exp(log w_i), computed with max subtraction.
double log_mean_weight(const Eigen::Ref<const Eigen::VectorXd>& log_weights);

/// Systematic resampling when ESS/N < threshold. The accumulated log-mass
/// absorbs the mean weight so the unnormalized mass estimate is unchanged.
ParticleCloud pf_resample(const ParticleCloud& cloud, double threshold, RngStream& rng);

struct ParticleEstimate {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    double log_mass = 0.0;
    double ess = 0.0;
};

ParticleEstimate pf_estimate(const ParticleCloud& cloud);

struct ParticleOptions {
    std::size_t particles = 1000;
    double resample_threshold = 0.5;
    unsigned jobs = 1;
    /// Called after each weighting step (before resampling); for debugging dumps.
    std::function<void(std::size_t node, const ParticleCloud&)> on_step;
};

struct ParticleRun {
    std::vector<double> t;
    std::vector<ParticleEstimate> estimates;
    std::size_t resamples = 0;

    Eigen::MatrixXd means() const;
    FilterTrack track() const;
};

/// Bootstrap filter over the whole observation path, seeded by `rng`.
ParticleRun run_particle(const Scenario& s, const Eigen::MatrixXd& y, const ParticleOptions& options, RngStream rng);

}  // namespace bvfilter
