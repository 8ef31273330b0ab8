#include "bvfilter/bv_path.hpp"

#include "bvfilter/error.hpp"

#include <algorithm>
#include <cmath>

namespace bvfilter {

namespace {

Eigen::VectorXd interpolate_knots(const std::vector<Knot>& knots, std::size_t dim, double t) {
    // knots are sorted and start with (0, 0)
    if (t >= knots.back().time) return knots.back().value;
    auto hi = std::upper_bound(knots.begin(), knots.end(), t, [](double v, const Knot& k) { return v < k.time; });
    auto lo = std::prev(hi);
    const double span = hi->time - lo->time;
    const double w = span > 0.0 ? (t - lo->time) / span : 1.0;
    Eigen::VectorXd v = (1.0 - w) * lo->value + w * hi->value;
    if (static_cast<std::size_t>(v.size()) != dim) throw GridError("knot dimension mismatch");
    return v;
}

}  // namespace

BVPath::BVPath(const TimeGrid& grid, std::size_t dim, std::vector<Jump> jumps, std::vector<Knot> knots,
               double fuel_bound)
    : grid_(grid), dim_(dim), fuel_bound_(fuel_bound), jumps_(std::move(jumps)), knots_(std::move(knots)) {
    if (dim == 0) throw GridError("BV path dimension must be positive");
    const auto m = static_cast<Eigen::Index>(dim);
    const auto steps = static_cast<Eigen::Index>(grid.steps());
    const auto nodes = steps + 1;

    std::sort(knots_.begin(), knots_.end(), [](const Knot& a, const Knot& b) { return a.time < b.time; });
    for (const auto& k : knots_) {
        if (k.value.size() != m) throw GridError("continuous-part knot has wrong dimension");
        if (k.time < 0.0 || !std::isfinite(k.time) || !k.value.allFinite())
            throw GridError("continuous-part knots must be finite with t >= 0");
    }
    if (!knots_.empty() && knots_.front().time == 0.0) {
        if (knots_.front().value.cwiseAbs().maxCoeff() != 0.0)
            throw GridError("continuous part must start at 0 (nu_{0-} = 0)");
    } else {
        knots_.insert(knots_.begin(), Knot{0.0, Eigen::VectorXd::Zero(m)});
    }
    for (std::size_t i = 1; i < knots_.size(); ++i)
        if (knots_[i].time == knots_[i - 1].time) throw GridError("duplicate continuous-part knot time");

    std::sort(jumps_.begin(), jumps_.end(), [](const Jump& a, const Jump& b) { return a.time < b.time; });
    jump_nodes_ = Eigen::MatrixXd::Zero(m, nodes);
    has_jump_.assign(static_cast<std::size_t>(nodes), false);
    for (const auto& j : jumps_) {
        if (j.size.size() != m) throw GridError("jump has wrong dimension");
        if (!(j.time >= 0.0) || j.time > grid.horizon() + 1e-12 || !j.size.allFinite())
            throw GridError("jump times must lie in [0, T] and sizes must be finite");
        const std::size_t k = grid.nearest_node(j.time);
        if (has_jump_[k]) throw GridError("two jumps snap to the same time node");
        has_jump_[k] = true;
        jump_nodes_.col(static_cast<Eigen::Index>(k)) = j.size;
        snapped_.push_back(Jump{grid.time(k), j.size});
    }

    continuous_increments_.resize(m, steps);
    Eigen::VectorXd prev = interpolate_knots(knots_, dim, 0.0);
    for (Eigen::Index k = 0; k < steps; ++k) {
        Eigen::VectorXd next = interpolate_knots(knots_, dim, grid.time(static_cast<std::size_t>(k + 1)));
        continuous_increments_.col(k) = next - prev;
        prev = std::move(next);
    }

    continuous_values_.resize(m, nodes);
    values_.resize(m, nodes);
    continuous_values_.col(0).setZero();
    values_.col(0) = jump_nodes_.col(0);
    for (Eigen::Index k = 0; k < steps; ++k) {
        continuous_values_.col(k + 1) = continuous_values_.col(k) + continuous_increments_.col(k);
        values_.col(k + 1) = values_.col(k) + continuous_increments_.col(k) + jump_nodes_.col(k + 1);
    }
}

BVIncrement BVPath::increment(std::size_t k) const {
    if (k >= grid_.steps()) throw GridError("cell index out of range");
    BVIncrement inc;
    inc.continuous = continuous_increments_.col(static_cast<Eigen::Index>(k));
    if (has_jump_[k + 1]) inc.jump = jump_nodes_.col(static_cast<Eigen::Index>(k + 1));
    return inc;
}

double bv_total_variation(const BVPath& nu, std::size_t component) {
    if (component >= nu.dim()) throw GridError("component index out of range");
    const auto i = static_cast<Eigen::Index>(component);
    double tv = nu.continuous_increments().row(i).cwiseAbs().sum();
    for (const auto& j : nu.jumps()) tv += std::abs(j.size[i]);
    return tv;
}

BVIncrement bv_increment(const BVPath& nu, double t_begin, double t_end) {
    const auto& g = nu.grid();
    const std::size_t k0 = g.node_index(t_begin);
    const std::size_t k1 = g.node_index(t_end);
    if (k1 != k0 + 1) throw GridError("interval is not a single time-grid cell");
    return nu.increment(k0);
}

}  // namespace bvfilter
