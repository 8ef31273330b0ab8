#pragma once

#include "bvfilter/scenario.hpp"
#include "bvfilter/types.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace bvfilter {

/// Finite-difference discretization of the signal generator
///   𝒜φ = b·Dφ + ½ tr(D²φ σσ*)
/// and of its adjoint 𝒜*p = -Σ ∂_i(b_i p) + Σ ∂_ij(a_ij p), with b and
/// a = ½σσ* sampled at the grid nodes for one time instant.
///
/// The adjoint uses conservative central differences with p = 0 outside the
/// grid, so its column sums vanish except next to the boundary. The generator
/// uses central differences inside and second-order one-sided differences on
/// the boundary.
class GeneratorStencil {
public:
    GeneratorStencil(const SpatialGrid& grid, Eigen::MatrixXd drift, Eigen::MatrixXd half_cov);
    GeneratorStencil(const Scenario& s, double t);

    const SpatialGrid& grid() const { return grid_; }
    const Eigen::MatrixXd& drift() const { return drift_; }
    const Eigen::MatrixXd& half_covariance() const { return half_cov_; }

    Eigen::VectorXd apply_adjoint(const Eigen::Ref<const Eigen::VectorXd>& p) const;
    Eigen::VectorXd apply_generator(const Eigen::Ref<const Eigen::VectorXd>& phi) const;

    /// max over nodes of Δt (Σ_i |a_ii| / Δx_i² + |a_01| / (Δx_0 Δx_1)).
    double cfl_number(double dt) const;

    /// Dense matrix of the adjoint; for small grids and tests.
    Eigen::MatrixXd adjoint_matrix() const;

private:
    SpatialGrid grid_;
    Eigen::MatrixXd drift_;     // m x nodes
    Eigen::MatrixXd half_cov_;  // packed(m) x nodes
};

/// 𝒜φ for a grid function φ at time t.
Eigen::VectorXd generator_apply(const Scenario& s, double t, const Eigen::Ref<const Eigen::VectorXd>& phi);

/// Largest admissible CFL number of the explicit Fokker–Planck sub-step.
inline constexpr double kMaxCfl = 0.5;

// Sub-steps of one splitting step, exposed so reduced evolutions can be
// assembled from the same pieces.

/// p ← max(p + Δt 𝒜* p, 0).
void fokker_planck_substep(const GeneratorStencil& stencil, DensityField& p, double dt);
/// p(x) ← p(x - shift) by multilinear interpolation, zero inflow; exact index
/// shift when every component of shift is a multiple of the spacing.
void translate_density(DensityField& p, const Eigen::Ref<const Eigen::VectorXd>& shift);
/// p(x) ← p(x) exp{g(x)·ΔB̄ - ½‖g(x)‖² Δt}, g = γ^{-1} h on the grid (n x nodes).
void observation_substep(DensityField& p, const Eigen::Ref<const Eigen::MatrixXd>& g,
                         const Eigen::Ref<const Eigen::VectorXd>& dbbar, double dt);

/// One splitting step over the cell starting at t_k (no jump inside the cell).
DensityField zakai_step(const Scenario& s, const DensityField& p, double t_k, const Eigen::Ref<const Eigen::VectorXd>& dy,
                        const Eigen::Ref<const Eigen::VectorXd>& dnu_c);

/// p_new(x) = p_old(x - Δν).
DensityField jump_reset(const DensityField& p, const Eigen::Ref<const Eigen::VectorXd>& jump);

/// Reusable solver for one scenario; caches the stencil and γ^{-1}h on the grid
/// when the coefficients are time-homogeneous. Throws NumericalError at
/// construction if the CFL condition fails.
class ZakaiSolver {
public:
    explicit ZakaiSolver(const Scenario& s);

    const Scenario& scenario() const { return scenario_; }

    /// ξ sampled on the grid, scaled to unit trapezoidal mass, then Δν_0 applied.
    DensityField initial_density() const;

    /// Cell k: Fokker–Planck, transport by Δν^c_k, observation update with ΔY_k.
    /// Does not apply the jump at t_{k+1}.
    void step(DensityField& p, std::size_t k, const Eigen::Ref<const Eigen::VectorXd>& dy) const;

    /// π(h) at time t.
    Eigen::VectorXd observation_mean(const DensityField& p, double t) const;
    DensityMoments moments(const DensityField& p) const;

private:
    const GeneratorStencil& stencil_at(double t, std::optional<GeneratorStencil>& scratch) const;
    Eigen::MatrixXd scaled_observation(double t) const;

    Scenario scenario_;
    Eigen::MatrixXd points_;
    Eigen::VectorXd weights_;
    std::optional<GeneratorStencil> stencil_;
    std::optional<Eigen::MatrixXd> scaled_h_;
};

struct ZakaiOptions {
    /// Keep a snapshot every `snapshot_stride` nodes (0 keeps none).
    std::size_t snapshot_stride = 0;
};

/// Output of run_zakai / run_ks, recorded at every time node.
struct ZakaiRun {
    std::vector<double> t;
    Eigen::VectorXd log_mass;          // log ρ_t(1); for KS the accumulated normalizers
    Eigen::MatrixXd mean;              // m x nodes, π_t(x)
    std::vector<Eigen::MatrixXd> cov;  // π_t(xx*) - π_t(x)π_t(x)*
    Eigen::MatrixXd pi_h;              // n x nodes, π_t(h_t)
    std::vector<DensityField> snapshots;
    DensityField final_density;

    FilterTrack track(const std::string& method) const;
};

/// Unnormalized solver: normalization deferred to the recorded moments.
ZakaiRun run_zakai(const Scenario& s, const Eigen::MatrixXd& y, const ZakaiOptions& options = {});

/// Normalized solver: renormalizes to unit mass after every step and every reset.
/// Throws NumericalError("filter collapse") on mass underflow.
ZakaiRun run_ks(const Scenario& s, const Eigen::MatrixXd& y, const ZakaiOptions& options = {});

struct MassFormulaCheck {
    double solver_log_mass = 0.0;
    double formula_log_mass = 0.0;
    double discrepancy = 0.0;
};

/// Left-point quadrature of log ρ_T(1) = ∫γ^{-1}π(h)·dB̄ - ½∫‖γ^{-1}π(h)‖² ds with ΔB̄ = γ^{-1}ΔY.
double mass_formula_log(const Eigen::MatrixXd& pi_h, const Eigen::MatrixXd& y, const Scenario& s);

MassFormulaCheck mass_formula_check(const Eigen::MatrixXd& pi_h, const Eigen::MatrixXd& y, const Scenario& s,
                                    double solver_log_mass);
MassFormulaCheck mass_formula_check(const ZakaiRun& run, const Eigen::MatrixXd& y, const Scenario& s);

/// ΔI_k = ΔB̄_k - γ^{-1}(t_k) π_k(h) Δt.
Eigen::MatrixXd innovation_increments(const Eigen::MatrixXd& pi_h, const Eigen::MatrixXd& y, const Scenario& s);

}  // namespace bvfilter
