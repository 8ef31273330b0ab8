#include "bvfilter/scenario.hpp"

#include "bvfilter/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace bvfilter {

namespace {

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

bool is_positive_definite(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff() > 0.0;
}

std::vector<std::size_t> sample_nodes(std::size_t nodes, std::size_t max_samples) {
    std::vector<std::size_t> out;
    const std::size_t stride = std::max<std::size_t>(1, (nodes + max_samples - 1) / max_samples);
    for (std::size_t k = 0; k < nodes; k += stride) out.push_back(k);
    if (out.back() != nodes - 1) out.push_back(nodes - 1);
    return out;
}

}  // namespace

InitialLaw InitialLaw::gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
    return mixture({GaussianComponent{1.0, std::move(mean), std::move(cov)}});
}

InitialLaw InitialLaw::mixture(std::vector<GaussianComponent> components) {
    if (components.empty()) throw ScenarioError("initial law: empty mixture");
    InitialLaw law;
    law.kind_ = Kind::GaussianMixture;
    law.dim_ = static_cast<std::size_t>(components.front().mean.size());
    double total = 0.0;
    for (const auto& c : components) {
        if (static_cast<std::size_t>(c.mean.size()) != law.dim_ || c.cov.rows() != c.mean.size() ||
            c.cov.cols() != c.mean.size())
            throw ScenarioError("initial law: inconsistent mixture component dimensions");
        if (!(c.weight > 0.0)) throw ScenarioError("initial law: mixture weights must be positive");
        if (!c.cov.isApprox(c.cov.transpose()) || !c.mean.allFinite())
            throw ScenarioError("initial law: covariance must be symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.cov, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff()))
            throw ScenarioError("initial law: covariance must be positive semi-definite");
        total += c.weight;
    }
    double acc = 0.0;
    for (auto& c : components) {
        c.weight /= total;
        acc += c.weight;
        law.cumulative_.push_back(acc);
        law.factors_.push_back(psd_factor(c.cov));
    }
    law.cumulative_.back() = 1.0;
    law.components_ = std::move(components);
    return law;
}

InitialLaw InitialLaw::grid_density(SpatialGrid grid, Eigen::VectorXd values) {
    if (static_cast<std::size_t>(values.size()) != grid.size())
        throw ScenarioError("initial law: grid density has wrong number of values");
    if (!values.allFinite() || values.minCoeff() < 0.0)
        throw ScenarioError("initial law: grid density must be finite and nonnegative");
    const Eigen::VectorXd w = grid.trapezoid_weights();
    const double mass = w.dot(values);
    if (!(mass > 0.0)) throw ScenarioError("initial law: grid density has zero mass");
    InitialLaw law;
    law.kind_ = Kind::GridDensity;
    law.dim_ = grid.dims();
    law.grid_values_ = values / mass;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < values.size(); ++j) {
        acc += w[j] * law.grid_values_[j];
        law.cumulative_.push_back(acc);
    }
    law.cumulative_.back() = 1.0;
    law.grid_ = std::move(grid);
    return law;
}

bool InitialLaw::square_integrable() const {
    if (kind_ == Kind::GridDensity) return true;
    return std::all_of(components_.begin(), components_.end(),
                       [](const GaussianComponent& c) { return is_positive_definite(c.cov); });
}

Eigen::VectorXd InitialLaw::mean() const {
    const auto m = static_cast<Eigen::Index>(dim_);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(m);
    if (kind_ == Kind::GaussianMixture) {
        for (const auto& c : components_) mu += c.weight * c.mean;
        return mu;
    }
    const Eigen::VectorXd w = grid_->trapezoid_weights().cwiseProduct(grid_values_);
    return grid_->points() * w;
}

Eigen::MatrixXd InitialLaw::covariance() const {
    const Eigen::VectorXd mu = mean();
    const auto m = static_cast<Eigen::Index>(dim_);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
    if (kind_ == Kind::GaussianMixture) {
        for (const auto& c : components_) {
            const Eigen::VectorXd dm = c.mean - mu;
            cov += c.weight * (c.cov + dm * dm.transpose());
        }
        return cov;
    }
    const Eigen::VectorXd w = grid_->trapezoid_weights().cwiseProduct(grid_values_);
    const Eigen::MatrixXd centered = grid_->points().colwise() - mu;
    return centered * w.asDiagonal() * centered.transpose();
}

Eigen::VectorXd InitialLaw::sample(RngStream& rng) const {
    const auto pick = [&] {
        const double u = rng.uniform();
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative_.begin(),
                                                                 static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
    };
    const std::size_t k = cumulative_.size() > 1 ? pick() : 0;
    const auto m = static_cast<Eigen::Index>(dim_);
    if (kind_ == Kind::GaussianMixture) {
        Eigen::VectorXd z(m);
        for (Eigen::Index i = 0; i < m; ++i) z[i] = rng.normal();
        return components_[k].mean + factors_[k] * z;
    }
    // node chosen by quadrature mass, then uniform jitter within its cell
    const auto idx = grid_->unflatten(k);
    Eigen::VectorXd x(m);
    for (std::size_t a = 0; a < dim_; ++a) {
        const double h = grid_->spacing(a);
        const double c = grid_->coordinate(a, idx[a]) + (rng.uniform() - 0.5) * h;
        x[static_cast<Eigen::Index>(a)] = std::clamp(c, grid_->lower(a), grid_->upper(a));
    }
    return x;
}

Eigen::VectorXd InitialLaw::density_on(const SpatialGrid& grid) const {
    if (grid.dims() != dim_) throw ScenarioError("initial law: grid dimension mismatch");
    if (!square_integrable()) throw ScenarioError("initial law has no square-integrable density");
    const Eigen::MatrixXd pts = grid.points();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
    if (kind_ == Kind::GridDensity) {
        if (grid == *grid_) return grid_values_;
        for (Eigen::Index j = 0; j < out.size(); ++j) out[j] = interpolate(*grid_, grid_values_, pts.col(j));
        return out;
    }
    const double m = static_cast<double>(dim_);
    for (const auto& c : components_) {
        Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
        const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        const double log_norm = std::log(c.weight) - 0.5 * (m * std::log(2.0 * std::numbers::pi) + log_det);
        const Eigen::MatrixXd centered = pts.colwise() - c.mean;
        const Eigen::MatrixXd solved = llt.matrixL().solve(centered);
        const Eigen::ArrayXd quad = solved.colwise().squaredNorm().transpose().array();
        out.array() += (log_norm - 0.5 * quad).exp();
    }
    return out;
}

bool ValidationReport::has(std::string_view code) const {
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.code == code; });
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < violations.size(); ++i) os << (i ? "; " : "") << violations[i].message;
    return os.str();
}

ValidationReport validate_scenario(const ScenarioSpec& s) {
    ValidationReport report;
    auto fail = [&](std::string code, std::string message) {
        report.violations.push_back({std::move(code), std::move(message)});
    };

    if (!s.drift || !s.diffusion || !s.observation || !s.gamma) {
        fail("missing_coefficient", "scenario is missing one of b, sigma, h, gamma");
        return report;
    }
    if (s.drift->input_dim() != s.m || s.drift->output_dim() != s.m) fail("dimension", "dimension mismatch: b must map R^m to R^m");
    if (s.diffusion->state_dim() != s.m || s.diffusion->noise_dim() != s.d)
        fail("dimension", "dimension mismatch: sigma must be m x d");
    if (s.observation->input_dim() != s.m || s.observation->output_dim() != s.n)
        fail("dimension", "dimension mismatch: h must map R^m to R^n");
    if (s.gamma->dim() != s.n) fail("dimension", "dimension mismatch: gamma must be n x n");
    if (static_cast<std::size_t>(s.y0.size()) != s.n) fail("dimension", "dimension mismatch: y0 must have n entries");
    if (s.xi.dim() != s.m) fail("dimension", "dimension mismatch: initial law must live in R^m");
    if (s.nu.dim() != s.m) fail("dimension", "dimension mismatch: nu must have m components");
    else if (!(s.nu.grid() == s.time)) fail("dimension", "nu is sampled on a different time grid");
    if (s.space && s.space->dims() != s.m) fail("dimension", "dimension mismatch: spatial grid must be m-dimensional");
    if (!report.passes()) return report;

    report.xi_square_integrable = s.xi.square_integrable();

    const double fuel = s.nu.fuel_bound();
    for (std::size_t i = 0; i < s.m; ++i) {
        const double tv = bv_total_variation(s.nu, i);
        if (tv > fuel * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "fuel bound exceeded: component " << i << " has |nu|_T = " << tv << " > K = " << fuel;
            fail("fuel", os.str());
        }
    }

    const auto nodes = s.gamma->is_constant() ? std::vector<std::size_t>{0} : sample_nodes(s.time.nodes(), 257);
    bool asym = false, not_pd = false;
    double min_eig = std::numeric_limits<double>::infinity();
    for (std::size_t k : nodes) {
        const Eigen::MatrixXd g = s.gamma->at(s.time.time(k));
        if (!g.allFinite() || (g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff())) {
            asym = true;
            continue;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
        min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
        if (eig.eigenvalues().minCoeff() < s.gamma_floor) not_pd = true;
    }
    if (asym) fail("gamma_symmetry", "gamma not symmetric");
    if (not_pd) {
        std::ostringstream os;
        os << "gamma not uniformly positive definite (min eigenvalue " << min_eig << " < delta = " << s.gamma_floor << ")";
        fail("gamma_pd", os.str());
    }

    if (s.space && (s.drift_bound || s.diffusion_bound || s.observation_bound)) {
        const Eigen::MatrixXd pts = s.space->points();
        const bool homogeneous = s.drift->time_homogeneous() && s.diffusion->time_homogeneous() &&
                                 s.observation->time_homogeneous();
        const auto times = homogeneous ? std::vector<std::size_t>{0} : sample_nodes(s.time.nodes(), 17);
        double max_b = 0.0, max_a = 0.0, max_h = 0.0;
        for (std::size_t k : times) {
            const double t = s.time.time(k);
            if (s.drift_bound) max_b = std::max(max_b, s.drift->evaluate(t, pts).cwiseAbs().maxCoeff());
            if (s.diffusion_bound) max_a = std::max(max_a, s.diffusion->half_covariance(t, pts).cwiseAbs().maxCoeff());
            if (s.observation_bound) max_h = std::max(max_h, s.observation->evaluate(t, pts).cwiseAbs().maxCoeff());
        }
        auto check = [&](const std::optional<double>& bound, double value, const char* code, const char* what) {
            if (bound && !(value <= *bound)) {
                std::ostringstream os;
                os << what << " bound exceeded on the spatial grid: " << value << " > " << *bound;
                fail(code, os.str());
            }
        };
        check(s.drift_bound, max_b, "drift_bound", "drift K_b");
        check(s.diffusion_bound, max_a, "diffusion_bound", "diffusion K_sigma");
        check(s.observation_bound, max_h, "observation_bound", "observation K_h");
    }
    return report;
}

Scenario::Scenario(ScenarioSpec spec) : spec_(std::move(spec)), report_(validate_scenario(spec_)) {
    if (!report_.passes()) return;
    if (spec_.gamma->is_constant()) constant_gamma_inverse_ = spec_.gamma->at(0.0).inverse();

    const auto* b = dynamic_cast<const AffineField*>(spec_.drift.get());
    const auto* sig = dynamic_cast<const ConstantDiffusion*>(spec_.diffusion.get());
    const auto* h = dynamic_cast<const AffineField*>(spec_.observation.get());
    const auto* zero_h = dynamic_cast<const ZeroField*>(spec_.observation.get());
    const auto* zero_b = dynamic_cast<const ZeroField*>(spec_.drift.get());
    const auto* gam = dynamic_cast<const ConstantNoise*>(spec_.gamma.get());
    if ((b || zero_b) && sig && (h || zero_h) && gam && spec_.xi.is_single_gaussian()) {
        const auto m = static_cast<Eigen::Index>(spec_.m);
        const auto n = static_cast<Eigen::Index>(spec_.n);
        LinearGaussianModel lg;
        lg.A = b ? b->matrix() : Eigen::MatrixXd::Zero(m, m);
        lg.c = b ? b->offset() : Eigen::VectorXd::Zero(m);
        lg.sigma = sig->matrix();
        lg.H = h ? h->matrix() : Eigen::MatrixXd::Zero(n, m);
        lg.g = h ? h->offset() : Eigen::VectorXd::Zero(n);
        lg.gamma = gam->at(0.0);
        lg.mean0 = spec_.xi.components().front().mean;
        lg.cov0 = spec_.xi.components().front().cov;
        linear_ = std::move(lg);
    }
}

const SpatialGrid& Scenario::space() const {
    if (!spec_.space) throw ScenarioError("scenario has no spatial grid");
    return *spec_.space;
}

void Scenario::require_valid(std::string_view caller) const {
    if (!report_.passes())
        throw ScenarioError(std::string(caller) + ": scenario failed validation: " + report_.summary());
}

bool Scenario::observation_is_zero() const {
    return dynamic_cast<const ZeroField*>(spec_.observation.get()) != nullptr;
}

bool Scenario::time_homogeneous() const {
    return spec_.drift->time_homogeneous() && spec_.diffusion->time_homogeneous() &&
           spec_.observation->time_homogeneous() && spec_.gamma->is_constant();
}

Scenario Scenario::with_time_grid(const TimeGrid& grid) const {
    ScenarioSpec s = spec_;
    s.time = grid;
    s.nu = spec_.nu.on_grid(grid);
    return Scenario(std::move(s));
}

Scenario Scenario::with_space(const SpatialGrid& grid) const {
    ScenarioSpec s = spec_;
    s.space = grid;
    return Scenario(std::move(s));
}

Eigen::MatrixXd Scenario::gamma_inverse(double t) const {
    if (constant_gamma_inverse_) return *constant_gamma_inverse_;
    return spec_.gamma->at(t).inverse();
}

}  // namespace bvfilter
