#include "bvfilter/mollify.hpp"

#include "bvfilter/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bvfilter {

namespace {

void require_eps(double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw Error("heat kernel needs eps > 0");
}

double kernel_1d(double x, double eps) {
    return std::exp(-x * x / (2.0 * eps)) / std::sqrt(2.0 * std::numbers::pi * eps);
}

Eigen::VectorXd axis_weights(const SpatialGrid& grid, std::size_t axis) {
    const auto n = static_cast<Eigen::Index>(grid.count(axis));
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, grid.spacing(axis));
    w[0] *= 0.5;
    w[n - 1] *= 0.5;
    return w;
}

// K(i, j) = w_j ψ_ε(x_i - x_j) along one axis.
Eigen::MatrixXd axis_operator(const SpatialGrid& grid, std::size_t axis, double eps) {
    const auto n = static_cast<Eigen::Index>(grid.count(axis));
    const Eigen::VectorXd w = axis_weights(grid, axis);
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            k(i, j) = w[j] * kernel_1d(grid.spacing(axis) * static_cast<double>(i - j), eps);
    return k;
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

bool interior(const SpatialGrid& grid, std::size_t flat, double margin) {
    const auto idx = grid.unflatten(flat);
    for (std::size_t a = 0; a < grid.dims(); ++a) {
        const double x = grid.coordinate(a, idx[a]);
        if (x - grid.lower(a) < margin || grid.upper(a) - x < margin) return false;
        if (idx[a] == 0 || idx[a] + 1 == grid.count(a)) return false;
    }
    return true;
}

TpropCheck inequality(std::string name, double lhs, double rhs) {
    return {std::move(name), lhs, rhs, std::max(0.0, lhs - rhs), lhs <= rhs};
}

}  // namespace

DiscreteMeasure DiscreteMeasure::dirac(const Eigen::VectorXd& x, double weight) {
    return {x, Eigen::VectorXd::Constant(1, weight)};
}

double heat_kernel(const Eigen::Ref<const Eigen::VectorXd>& x, double eps) {
    require_eps(eps);
    const double m = static_cast<double>(x.size());
    return std::pow(2.0 * std::numbers::pi * eps, -0.5 * m) * std::exp(-x.squaredNorm() / (2.0 * eps));
}

DensityField t_eps_measure(const DiscreteMeasure& mu, double eps, const SpatialGrid& grid) {
    require_eps(eps);
    if (mu.dims() != grid.dims()) throw GridError("t_eps_measure: measure and grid dimensions differ");
    const Eigen::MatrixXd pts = grid.points();
    DensityField out{grid, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size())), 0.0, 0.0};
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
        double v = 0.0;
        for (Eigen::Index k = 0; k < mu.weights.size(); ++k)
            v += mu.weights[k] * heat_kernel(mu.locations.col(k) - pts.col(j), eps);
        out.values[j] = v;
    }
    return out;
}

Eigen::VectorXd t_eps_function(const SpatialGrid& grid, const Eigen::Ref<const Eigen::VectorXd>& f, double eps) {
    require_eps(eps);
    if (f.size() != static_cast<Eigen::Index>(grid.size())) throw GridError("t_eps_function: size mismatch");
    if (grid.dims() == 1) return axis_operator(grid, 0, eps) * f;
    const auto n0 = static_cast<Eigen::Index>(grid.count(0));
    const auto n1 = static_cast<Eigen::Index>(grid.count(1));
    const Eigen::Map<const RowMajor> values(f.data(), n0, n1);
    const RowMajor smoothed = axis_operator(grid, 0, eps) * values * axis_operator(grid, 1, eps).transpose();
    return Eigen::Map<const Eigen::VectorXd>(smoothed.data(), smoothed.size());
}

double t_eps_function_at(const SpatialGrid& grid, const Eigen::Ref<const Eigen::VectorXd>& f, double eps,
                         const Eigen::Ref<const Eigen::VectorXd>& x) {
    require_eps(eps);
    const Eigen::MatrixXd pts = grid.points();
    const Eigen::VectorXd w = grid.trapezoid_weights();
    double v = 0.0;
    for (Eigen::Index j = 0; j < pts.cols(); ++j) v += w[j] * heat_kernel(x - pts.col(j), eps) * f[j];
    return v;
}

double discrete_l2_norm(const SpatialGrid& grid, const Eigen::Ref<const Eigen::VectorXd>& values) {
    return std::sqrt(grid.trapezoid_weights().dot(values.cwiseAbs2()));
}

bool TpropReport::passes() const {
    return std::all_of(checks.begin(), checks.end(), [](const TpropCheck& c) { return c.pass; });
}

TpropReport tprop_suite(const TpropFixture& fx) {
    const SpatialGrid& grid = fx.grid;
    const double eps = fx.eps;
    TpropReport report;
    const DiscreteMeasure mod = fx.mu.abs();
    report.checks.push_back(inequality(fx.name + ": (i) |T_2e|mu|| <= |T_e|mu||",
                                       discrete_l2_norm(grid, t_eps_measure(mod, 2.0 * eps, grid).values),
                                       discrete_l2_norm(grid, t_eps_measure(mod, eps, grid).values)));

    report.checks.push_back(inequality(fx.name + ": (ii) |T_e f| <= |f|",
                                       discrete_l2_norm(grid, t_eps_function(grid, fx.f, eps)),
                                       discrete_l2_norm(grid, fx.f)));

    const Eigen::VectorXd w = grid.trapezoid_weights();
    const double lhs = w.dot(t_eps_measure(fx.mu, eps, grid).values.cwiseProduct(fx.f));
    double rhs = 0.0;
    for (Eigen::Index k = 0; k < fx.mu.weights.size(); ++k)
        rhs += fx.mu.weights[k] * t_eps_function_at(grid, fx.f, eps, fx.mu.locations.col(k));
    report.checks.push_back({fx.name + ": (iii) <T_e mu, f> = mu(T_e f)", lhs, rhs, std::abs(lhs - rhs),
                             std::abs(lhs - rhs) <= 1e-6});

    const Eigen::VectorXd smooth = t_eps_function(grid, fx.phi, eps);
    const double margin = 8.0 * std::sqrt(eps);
    for (std::size_t a = 0; a < grid.dims(); ++a) {
        const Eigen::VectorXd rhs_field = t_eps_function(grid, fx.grad_phi.row(static_cast<Eigen::Index>(a)).transpose(), eps);
        const auto stride = static_cast<Eigen::Index>(grid.stride(a));
        const double h = grid.spacing(a);
        double worst = 0.0;
        double at_lhs = 0.0;
        double at_rhs = 0.0;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            if (!interior(grid, j, margin)) continue;
            const auto jj = static_cast<Eigen::Index>(j);
            const double d = (smooth[jj + stride] - smooth[jj - stride]) / (2.0 * h);
            if (std::abs(d - rhs_field[jj]) >= worst) {
                worst = std::abs(d - rhs_field[jj]);
                at_lhs = d;
                at_rhs = rhs_field[jj];
            }
        }
        report.checks.push_back({fx.name + ": (v) d" + std::to_string(a) + " T_e phi = T_e d" + std::to_string(a) + " phi",
                                 at_lhs, at_rhs, worst, worst <= h * h});
    }
    return report;
}

std::vector<TpropFixture> default_tprop_fixtures(std::size_t m) {
    if (m != 1 && m != 2) throw GridError("default_tprop_fixtures: m must be 1 or 2");
    const SpatialGrid grid = m == 1 ? SpatialGrid::uniform_1d(-8.0, 8.0, 801)
                                    : SpatialGrid({-6.0, -6.0}, {6.0, 6.0}, {121, 121});
    const double eps = m == 1 ? 0.25 : 0.2;
    const Eigen::MatrixXd pts = grid.points();
    const auto nodes = pts.cols();
    const auto dm = static_cast<Eigen::Index>(m);

    auto gaussian = [&](double var) {
        Eigen::VectorXd v(nodes);
        for (Eigen::Index j = 0; j < nodes; ++j) v[j] = std::exp(-pts.col(j).squaredNorm() / (2.0 * var));
        return v;
    };

    std::vector<TpropFixture> out;

    TpropFixture delta;
    delta.name = "delta";
    delta.grid = grid;
    delta.eps = eps;
    delta.mu = DiscreteMeasure::dirac(Eigen::VectorXd::Constant(dm, 0.3));
    delta.f = gaussian(1.0);
    delta.phi = gaussian(2.0);
    delta.grad_phi = -(pts.array().rowwise() * (delta.phi.transpose().array() / 2.0)).matrix();
    out.push_back(delta);

    TpropFixture gauss;
    gauss.name = "gaussian";
    gauss.grid = grid;
    gauss.eps = eps;
    gauss.mu.locations.resize(dm, 3);
    gauss.mu.locations.setZero();
    gauss.mu.locations.row(0) << -1.0, 0.5, 2.0;
    gauss.mu.weights = Eigen::Vector3d(1.0, -0.5, 0.7);
    gauss.f = gaussian(0.5);
    gauss.phi = gaussian(1.0);
    gauss.grad_phi = -(pts.array().rowwise() * gauss.phi.transpose().array()).matrix();
    out.push_back(gauss);

    TpropFixture sine;
    sine.name = "sine";
    sine.grid = grid;
    sine.eps = eps;
    sine.mu.locations = Eigen::MatrixXd::Zero(dm, 2);
    sine.mu.locations(0, 1) = -0.7;
    sine.mu.weights = Eigen::Vector2d(0.6, 0.4);
    sine.f = gaussian(1.5);
    sine.phi.resize(nodes);
    sine.grad_phi.resize(dm, nodes);
    for (Eigen::Index j = 0; j < nodes; ++j) {
        const double s = pts.col(j).sum();
        sine.phi[j] = std::sin(s);
        sine.grad_phi.col(j).setConstant(std::cos(s));
    }
    out.push_back(sine);
    return out;
}

double semigroup_error(const SpatialGrid& grid, const Eigen::Ref<const Eigen::VectorXd>& f, double eps, double delta) {
    const Eigen::VectorXd composed = t_eps_function(grid, t_eps_function(grid, f, delta), eps);
    const Eigen::VectorXd direct = t_eps_function(grid, f, eps + delta);
    const double margin = 8.0 * std::sqrt(eps + delta);
    double worst = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j)
        if (interior(grid, j, margin))
            worst = std::max(worst, std::abs(composed[static_cast<Eigen::Index>(j)] - direct[static_cast<Eigen::Index>(j)]));
    return worst;
}

std::vector<double> smoothing_ladder(const DiscreteMeasure& mu, const SpatialGrid& grid, const std::vector<double>& eps) {
    const DiscreteMeasure mod = mu.abs();
    std::vector<double> out;
    out.reserve(eps.size());
    for (double e : eps) out.push_back(discrete_l2_norm(grid, t_eps_measure(mod, e, grid).values));
    return out;
}

}  // namespace bvfilter
