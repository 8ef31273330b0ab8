#include "bvfilter/grid.hpp"

#include "bvfilter/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bvfilter {

TimeGrid::TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw GridError("time horizon must be positive and finite");
    if (steps == 0) throw GridError("time grid needs at least one step");
    dt_ = horizon / static_cast<double>(steps);
}

double TimeGrid::time(std::size_t k) const {
    if (k == steps_) return horizon_;
    return static_cast<double>(k) * dt_;
}

std::size_t TimeGrid::node_index(double t) const {
    const double r = t / dt_;
    const double k = std::round(r);
    if (k < 0.0 || k > static_cast<double>(steps_) || std::abs(r - k) > 1e-9 * std::max(1.0, std::abs(r)))
        throw GridError("time " + std::to_string(t) + " is not a node of the time grid");
    return static_cast<std::size_t>(k);
}

std::size_t TimeGrid::nearest_node(double t) const {
    const double k = std::round(std::clamp(t, 0.0, horizon_) / dt_);
    return std::min(static_cast<std::size_t>(k), steps_);
}

SpatialGrid::SpatialGrid(std::vector<double> lower, std::vector<double> upper, std::vector<std::size_t> counts)
    : lower_(std::move(lower)), upper_(std::move(upper)), counts_(std::move(counts)) {
    const std::size_t m = counts_.size();
    if (m < 1 || m > 2) throw GridError("spatial grid dimension must be 1 or 2");
    if (lower_.size() != m || upper_.size() != m) throw GridError("spatial grid bounds do not match dimension");
    size_ = 1;
    for (std::size_t i = 0; i < m; ++i) {
        if (counts_[i] < 3) throw GridError("spatial grid needs at least 3 nodes per axis");
        if (!(upper_[i] > lower_[i]) || !std::isfinite(lower_[i]) || !std::isfinite(upper_[i]))
            throw GridError("spatial grid bounds must satisfy lower < upper");
        spacing_.push_back((upper_[i] - lower_[i]) / static_cast<double>(counts_[i] - 1));
        size_ *= counts_[i];
    }
}

double SpatialGrid::cell_volume() const {
    double v = 1.0;
    for (double h : spacing_) v *= h;
    return v;
}

std::array<std::size_t, 2> SpatialGrid::unflatten(std::size_t flat) const {
    if (dims() == 1) return {flat, 0};
    return {flat / counts_[1], flat % counts_[1]};
}

Eigen::MatrixXd SpatialGrid::points() const {
    Eigen::MatrixXd pts(dims(), size_);
    for (std::size_t j = 0; j < size_; ++j) {
        const auto idx = unflatten(j);
        for (std::size_t a = 0; a < dims(); ++a) pts(a, j) = coordinate(a, idx[a]);
    }
    return pts;
}

Eigen::VectorXd SpatialGrid::trapezoid_weights() const {
    Eigen::VectorXd w(size_);
    for (std::size_t j = 0; j < size_; ++j) {
        const auto idx = unflatten(j);
        double wj = cell_volume();
        for (std::size_t a = 0; a < dims(); ++a)
            if (idx[a] == 0 || idx[a] + 1 == counts_[a]) wj *= 0.5;
        w[j] = wj;
    }
    return w;
}

SpatialGrid SpatialGrid::refined() const {
    std::vector<std::size_t> counts;
    for (std::size_t c : counts_) counts.push_back(2 * (c - 1) + 1);
    return SpatialGrid(lower_, upper_, counts);
}

double interpolate(const SpatialGrid& grid, const Eigen::Ref<const Eigen::VectorXd>& values,
                   const Eigen::Ref<const Eigen::VectorXd>& point) {
    const std::size_t m = grid.dims();
    std::array<std::size_t, 2> base{0, 0};
    std::array<double, 2> frac{0.0, 0.0};
    for (std::size_t a = 0; a < m; ++a) {
        const double r = (point[static_cast<Eigen::Index>(a)] - grid.lower(a)) / grid.spacing(a);
        const double last = static_cast<double>(grid.count(a) - 1);
        if (!(r >= 0.0) || !(r <= last)) return 0.0;
        const double f = std::min(std::floor(r), last - 1.0);
        base[a] = static_cast<std::size_t>(f);
        frac[a] = r - f;
    }
    if (m == 1) return (1.0 - frac[0]) * values[static_cast<Eigen::Index>(base[0])] +
                       frac[0] * values[static_cast<Eigen::Index>(base[0] + 1)];
    double v = 0.0;
    for (std::size_t c0 = 0; c0 < 2; ++c0)
        for (std::size_t c1 = 0; c1 < 2; ++c1) {
            const double w = (c0 ? frac[0] : 1.0 - frac[0]) * (c1 ? frac[1] : 1.0 - frac[1]);
            v += w * values[static_cast<Eigen::Index>(grid.flatten(base[0] + c0, base[1] + c1))];
        }
    return v;
}

}  // namespace bvfilter
