#pragma once

#include "bvfilter/scenario.hpp"
#include "bvfilter/types.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace bvfilter {

struct KalmanOptions {
    /// Euler sub-steps per time-grid cell; ΔY and Δν^c are split evenly.
    std::size_t substeps = 1;
};

struct KalmanRun {
    std::vector<double> t;
    std::vector<GaussianBelief> beliefs;  // at each node, after any jump
    /// Belief just before each jump, keyed by node index.
    std::vector<std::pair<std::size_t, GaussianBelief>> pre_jump;

    Eigen::MatrixXd means() const;
    FilterTrack track() const;
};

/// Kalman–Bucy filter for linear-Gaussian scenarios with ν as a known input:
///   dm = (Am + c) dt + dν^c + P H*(γγ*)^{-1} (dY - (Hm + g) dt)
///   dP = AP + PA* + σσ* - P H*(γγ*)^{-1} H P
/// integrated by Euler; jumps shift m and leave P untouched. Throws
/// ScenarioError("oracle requires linear-Gaussian") otherwise.
KalmanRun kalman_run(const Scenario& s, const Eigen::MatrixXd& y, const KalmanOptions& options = {});

struct JumpIdentity {
    double max_cov_jump = 0.0;         // max_n ‖P_{T_n} - P_{T_n^-}‖
    double max_mean_jump_error = 0.0;  // max_n ‖(m_{T_n} - m_{T_n^-}) - Δν_{T_n}‖
    std::size_t jumps = 0;
};

JumpIdentity kalman_jump_identity_check(const Scenario& s, const Eigen::MatrixXd& y);

/// Kalman gain P H*(γγ*)^{-1}.
Eigen::MatrixXd kalman_gain(const LinearGaussianModel& model, const Eigen::MatrixXd& cov);

}  // namespace bvfilter
