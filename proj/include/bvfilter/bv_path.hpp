#pragma once

#include "bvfilter/grid.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace bvfilter {

/// A jump Δν at time `time`.
struct Jump {
    double time = 0.0;
    Eigen::VectorXd size;
};

/// Knot of the piecewise-linear continuous part ν^c.
struct Knot {
    double time = 0.0;
    Eigen::VectorXd value;
};

/// Increment of ν over one time-grid cell (t_k, t_{k+1}].
struct BVIncrement {
    Eigen::VectorXd continuous;
    std::optional<Eigen::VectorXd> jump;  // jump at t_{k+1}, if any
};

/// The bounded-variation input ν = ν^c + Σ Δν, sampled on a time grid.
///
/// Jump times are snapped to the nearest grid node at construction; ν_{0^-} = 0
/// so a jump at t = 0 is the initial kick Δν_0. The continuous part is linear
/// between knots with an implicit knot (0, 0) and is held constant after the
/// last knot. Node values are stored as prefix sums of the per-cell increments,
/// so replaying the increments reproduces them exactly.
class BVPath {
public:
    BVPath() = default;
    BVPath(const TimeGrid& grid, std::size_t dim, std::vector<Jump> jumps, std::vector<Knot> knots, double fuel_bound);

    /// ν ≡ 0 on the grid.
    static BVPath zero(const TimeGrid& grid, std::size_t dim, double fuel_bound = 1.0) {
        return BVPath(grid, dim, {}, {}, fuel_bound);
    }

    /// The same schedule resampled on another grid over the same horizon.
    BVPath on_grid(const TimeGrid& grid) const { return BVPath(grid, dim_, jumps_, knots_, fuel_bound_); }

    const TimeGrid& grid() const { return grid_; }
    std::size_t dim() const { return dim_; }
    double fuel_bound() const { return fuel_bound_; }

    /// Jumps after snapping, ordered by time.
    const std::vector<Jump>& jumps() const { return snapped_; }
    const std::vector<Knot>& knots() const { return knots_; }

    /// Continuous increment over cell k (m x steps).
    const Eigen::MatrixXd& continuous_increments() const { return continuous_increments_; }
    /// Jump at node k (zero column when none).
    Eigen::VectorXd jump_at(std::size_t k) const { return jump_nodes_.col(static_cast<Eigen::Index>(k)); }
    bool has_jump(std::size_t k) const { return has_jump_[k]; }

    /// ν_{t_k} (post-jump value at node k).
    Eigen::VectorXd value(std::size_t k) const { return values_.col(static_cast<Eigen::Index>(k)); }
    /// ν^c_{t_k}.
    Eigen::VectorXd continuous_value(std::size_t k) const { return continuous_values_.col(static_cast<Eigen::Index>(k)); }

    /// Increment over cell k, i.e. (t_k, t_{k+1}].
    BVIncrement increment(std::size_t k) const;

private:
    TimeGrid grid_;
    std::size_t dim_ = 0;
    double fuel_bound_ = 0.0;
    std::vector<Jump> jumps_;
    std::vector<Knot> knots_;
    std::vector<Jump> snapped_;
    Eigen::MatrixXd continuous_increments_;
    Eigen::MatrixXd jump_nodes_;
    std::vector<bool> has_jump_;
    Eigen::MatrixXd continuous_values_;
    Eigen::MatrixXd values_;
};

/// |ν^i|_T: sum of |jumps| plus the variation of the continuous part.
double bv_total_variation(const BVPath& nu, std::size_t component);

/// Increment over [t_k, t_{k+1}]; throws GridError if the interval is not one grid cell.
BVIncrement bv_increment(const BVPath& nu, double t_begin, double t_end);

}  // namespace bvfilter
