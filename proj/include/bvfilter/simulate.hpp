#pragma once

#include "bvfilter/rng.hpp"
#include "bvfilter/scenario.hpp"
#include "bvfilter/types.hpp"

#include <Eigen/Dense>

namespace bvfilter {

/// Measure under which the observation is generated.
///
/// Reference: Y = y0 + ∫γ dB̄, independent of X. Physical: dY = h(X) dt + γ dB.
enum class Measure { Reference, Physical };

struct SignalPath {
    Eigen::MatrixXd x;      // m x nodes, post-jump values X_{t_k}
    Eigen::MatrixXd x_pre;  // m x nodes, X_{t_k^-}; column 0 is X_{0^-}
    Eigen::MatrixXd dw;     // d x steps
};

struct ObservationPath {
    Eigen::MatrixXd y;      // n x nodes
    Eigen::MatrixXd noise;  // n x steps: ΔB̄ (reference) or ΔB (physical)
};

/// Euler–Maruyama for dX = b dt + σ dW + dν with jumps applied at their nodes.
SignalPath simulate_signal(const Scenario& s, RngStream& rng);

/// Y_{k+1} = Y_k + γ(t_k) ΔB̄_k.
ObservationPath simulate_observation_reference(const Scenario& s, RngStream& rng);

/// Y_{k+1} = Y_k + h(t_k, X_k) Δt + γ(t_k) ΔB_k.
ObservationPath simulate_observation_physical(const Scenario& s, const Eigen::MatrixXd& x, RngStream& rng);

/// log η along the path: left-point Itô sums of γ^{-1}h(X) against ΔB̄. log η_0 = 0.
Eigen::VectorXd girsanov_log_density(const Scenario& s, const Eigen::MatrixXd& x, const Eigen::MatrixXd& dbbar);

/// ΔB̄_k = γ^{-1}(t_k) ΔY_k.
Eigen::MatrixXd reference_increments(const Scenario& s, const Eigen::MatrixXd& y);

/// Full bundle: signal from rng.substream(0), observation noise from rng.substream(1).
PathBundle simulate_bundle(const Scenario& s, Measure measure, const RngStream& rng);

/// Terminal values of many independent bundles, path i driven by rng.substream(i).
struct EnsembleTerminal {
    Eigen::MatrixXd x;        // m x paths
    Eigen::MatrixXd y;        // n x paths
    Eigen::VectorXd log_eta;  // paths
};

EnsembleTerminal simulate_terminal(const Scenario& s, Measure measure, const RngStream& rng, std::size_t paths,
                                   unsigned jobs = 1);

/// Sample mean and its standard error.
struct MonteCarloEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
};

MonteCarloEstimate monte_carlo_mean(const Eigen::Ref<const Eigen::VectorXd>& samples);

}  // namespace bvfilter
