#pragma once

#include "bvfilter/grid.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace bvfilter {

/// Grid-sampled unnormalized density p_t of ρ_t.
///
/// The represented density is exp(log_scale) * values; solvers rescale
/// `values` into a safe range and carry the factor in `log_scale`.
struct DensityField {
    SpatialGrid grid;
    Eigen::VectorXd values;
    double log_scale = 0.0;
    double time = 0.0;

    /// Σ w_j values_j (trapezoidal), without the scale factor.
    double raw_mass() const { return grid.trapezoid_weights().dot(values); }
    double log_mass() const { return log_scale + std::log(raw_mass()); }
    /// exp(log_scale) * values.
    Eigen::VectorXd density() const { return std::exp(log_scale) * values; }
};

/// Normalized first and second moments of a grid density.
struct DensityMoments {
    double log_mass = 0.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

DensityMoments density_moments(const DensityField& p);

/// Weighted particle approximation of ρ_t.
///
/// ρ_t(1) ≈ exp(log_mass) * mean_i exp(log_weights_i).
struct ParticleCloud {
    Eigen::MatrixXd positions;  // m x N
    Eigen::VectorXd log_weights;
    double log_mass = 0.0;
    double time = 0.0;

    std::size_t size() const { return static_cast<std::size_t>(positions.cols()); }
};

struct GaussianBelief {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    double log_mass = 0.0;
};

/// Simulated signal, observation, driving noises and Girsanov density on a time grid.
struct PathBundle {
    std::vector<double> t;
    Eigen::MatrixXd x;          // m x nodes, X_{t_k}
    Eigen::MatrixXd x_pre;      // m x nodes, X_{t_k^-}
    Eigen::MatrixXd y;          // n x nodes
    Eigen::MatrixXd dw;         // d x steps
    Eigen::MatrixXd dbbar;      // n x steps, reference-measure noise B̄
    Eigen::VectorXd log_eta;    // nodes
};

/// Per-node filter output with a schema shared by every method, so that
/// runs can be diffed column by column.
struct FilterTrack {
    std::string method;
    std::vector<double> t;
    Eigen::MatrixXd mean;              // m x nodes
    std::vector<Eigen::MatrixXd> cov;  // nodes entries, m x m
    Eigen::VectorXd log_mass;          // nodes
    std::vector<std::pair<std::string, Eigen::VectorXd>> extras;

    std::size_t nodes() const { return t.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(mean.rows()); }
};

}  // namespace bvfilter
