#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <vector>

namespace bvfilter {

/// Uniform time grid t_k = k T / steps, k = 0..steps, starting at t0 = 0.
class TimeGrid {
public:
    TimeGrid() = default;
    TimeGrid(double horizon, std::size_t steps);

    double horizon() const { return horizon_; }
    std::size_t steps() const { return steps_; }
    std::size_t nodes() const { return steps_ + 1; }
    double dt() const { return dt_; }
    double time(std::size_t k) const;

    /// Index of the node at time t; throws GridError if t is not a node.
    std::size_t node_index(double t) const;
    /// Nearest node to t (t clamped to [0, T]).
    std::size_t nearest_node(double t) const;

    /// Same horizon, `factor` times as many steps.
    TimeGrid refined(std::size_t factor) const { return TimeGrid(horizon_, steps_ * factor); }

    bool operator==(const TimeGrid& other) const = default;

private:
    double horizon_ = 1.0;
    std::size_t steps_ = 1;
    double dt_ = 1.0;
};

/// Rectangular uniform grid on [lower_i, upper_i], m in {1, 2}.
///
/// Nodes are flattened row-major: the first axis is slowest.
class SpatialGrid {
public:
    SpatialGrid() = default;
    SpatialGrid(std::vector<double> lower, std::vector<double> upper, std::vector<std::size_t> counts);

    static SpatialGrid uniform_1d(double lower, double upper, std::size_t count) {
        return SpatialGrid({lower}, {upper}, {count});
    }

    std::size_t dims() const { return counts_.size(); }
    std::size_t size() const { return size_; }
    std::size_t count(std::size_t axis) const { return counts_[axis]; }
    double lower(std::size_t axis) const { return lower_[axis]; }
    double upper(std::size_t axis) const { return upper_[axis]; }
    double spacing(std::size_t axis) const { return spacing_[axis]; }
    double cell_volume() const;

    double coordinate(std::size_t axis, std::size_t i) const { return lower_[axis] + spacing_[axis] * static_cast<double>(i); }
    /// Per-axis index of a flattened node.
    std::array<std::size_t, 2> unflatten(std::size_t flat) const;
    std::size_t flatten(std::size_t i0, std::size_t i1 = 0) const { return dims() == 1 ? i0 : i0 * counts_[1] + i1; }
    /// Stride of an axis in the flattened layout.
    std::size_t stride(std::size_t axis) const { return (dims() == 2 && axis == 0) ? counts_[1] : 1; }

    /// All node coordinates as an m x size matrix.
    Eigen::MatrixXd points() const;
    /// Product trapezoidal quadrature weights (including cell volume).
    Eigen::VectorXd trapezoid_weights() const;

    /// Same box with 2 (count - 1) + 1 nodes per axis, so old nodes are kept.
    SpatialGrid refined() const;

    bool operator==(const SpatialGrid& other) const = default;

private:
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::vector<std::size_t> counts_;
    std::vector<double> spacing_;
    std::size_t size_ = 0;
};

/// Multilinear interpolation of nodal values at `point`; zero outside the box.
double interpolate(const SpatialGrid& grid, const Eigen::Ref<const Eigen::VectorXd>& values,
                   const Eigen::Ref<const Eigen::VectorXd>& point);

}  // namespace bvfilter
