#pragma once

#include "bvfilter/bv_path.hpp"
#include "bvfilter/coefficients.hpp"
#include "bvfilter/grid.hpp"
#include "bvfilter/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bvfilter {

struct GaussianComponent {
    double weight = 1.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Law ξ of X_{0^-}: a Gaussian mixture or an explicit density on a grid.
class InitialLaw {
public:
    enum class Kind { GaussianMixture, GridDensity };

    InitialLaw() = default;
    static InitialLaw gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov);
    static InitialLaw mixture(std::vector<GaussianComponent> components);
    static InitialLaw grid_density(SpatialGrid grid, Eigen::VectorXd values);

    Kind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    const std::vector<GaussianComponent>& components() const { return components_; }
    bool is_single_gaussian() const { return kind_ == Kind::GaussianMixture && components_.size() == 1; }

    /// True when ξ has a square-integrable Lebesgue density.
    bool square_integrable() const;

    Eigen::VectorXd mean() const;
    Eigen::MatrixXd covariance() const;

    /// One draw of X_{0^-}.
    Eigen::VectorXd sample(RngStream& rng) const;
    /// Density sampled on `grid`; throws ScenarioError without a density.
    Eigen::VectorXd density_on(const SpatialGrid& grid) const;

private:
    Kind kind_ = Kind::GaussianMixture;
    std::size_t dim_ = 0;
    std::vector<GaussianComponent> components_;
    std::vector<Eigen::MatrixXd> factors_;  // cov = F F*
    std::vector<double> cumulative_;        // mixture or grid-cell CDF
    std::optional<SpatialGrid> grid_;
    Eigen::VectorXd grid_values_;
};

/// Mutable description of a problem instance.
struct ScenarioSpec {
    std::size_t m = 1;  // state
    std::size_t n = 1;  // observation
    std::size_t d = 1;  // signal noise
    TimeGrid time{1.0, 100};
    std::optional<SpatialGrid> space;
    std::shared_ptr<const VectorField> drift;
    std::shared_ptr<const DiffusionField> diffusion;
    std::shared_ptr<const VectorField> observation;
    std::shared_ptr<const NoiseMatrix> gamma;
    InitialLaw xi;
    BVPath nu;
    Eigen::VectorXd y0;
    double gamma_floor = 1e-8;  // δ
    std::optional<double> drift_bound;        // K_b
    std::optional<double> diffusion_bound;    // K_σ
    std::optional<double> observation_bound;  // K_h
    std::uint64_t seed = 0;
};

struct Violation {
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool xi_square_integrable = false;

    bool passes() const { return violations.empty(); }
    bool has(std::string_view code) const;
    std::string summary() const;
};

/// Collects every violated modelling constraint; never throws.
ValidationReport validate_scenario(const ScenarioSpec& spec);

/// b(x) = A x + c, h(x) = H x + g with constant σ, γ and Gaussian ξ.
struct LinearGaussianModel {
    Eigen::MatrixXd A;
    Eigen::VectorXd c;
    Eigen::MatrixXd sigma;
    Eigen::MatrixXd H;
    Eigen::VectorXd g;
    Eigen::MatrixXd gamma;
    Eigen::VectorXd mean0;
    Eigen::MatrixXd cov0;
};

/// Immutable, validated scenario. Construction records the validation report;
/// downstream entry points call require_valid().
class Scenario {
public:
    explicit Scenario(ScenarioSpec spec);

    const ScenarioSpec& spec() const { return spec_; }
    std::size_t m() const { return spec_.m; }
    std::size_t n() const { return spec_.n; }
    std::size_t d() const { return spec_.d; }
    const TimeGrid& time() const { return spec_.time; }
    const SpatialGrid& space() const;
    bool has_space() const { return spec_.space.has_value(); }
    const VectorField& drift() const { return *spec_.drift; }
    const DiffusionField& diffusion() const { return *spec_.diffusion; }
    const VectorField& observation() const { return *spec_.observation; }
    const NoiseMatrix& gamma() const { return *spec_.gamma; }
    const InitialLaw& xi() const { return spec_.xi; }
    const BVPath& nu() const { return spec_.nu; }
    const Eigen::VectorXd& y0() const { return spec_.y0; }
    std::uint64_t seed() const { return spec_.seed; }

    const ValidationReport& validation() const { return report_; }
    /// Throws ScenarioError listing the violations.
    void require_valid(std::string_view caller) const;

    const std::optional<LinearGaussianModel>& linear() const { return linear_; }
    bool observation_is_zero() const;
    bool time_homogeneous() const;

    /// Same scenario on another time grid (ν resampled, jumps re-snapped).
    Scenario with_time_grid(const TimeGrid& grid) const;
    Scenario with_space(const SpatialGrid& grid) const;

    /// γ(t)^{-1}.
    Eigen::MatrixXd gamma_inverse(double t) const;

private:
    ScenarioSpec spec_;
    ValidationReport report_;
    std::optional<LinearGaussianModel> linear_;
    std::optional<Eigen::MatrixXd> constant_gamma_inverse_;
};

}  // namespace bvfilter
