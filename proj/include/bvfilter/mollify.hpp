#pragma once

#include "bvfilter/grid.hpp"
#include "bvfilter/types.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace bvfilter {

/// Finite signed measure Σ_k w_k δ_{x_k}.
struct DiscreteMeasure {
    Eigen::MatrixXd locations;  // m x K
    Eigen::VectorXd weights;    // K

    static DiscreteMeasure dirac(const Eigen::VectorXd& x, double weight = 1.0);

    std::size_t dims() const { return static_cast<std::size_t>(locations.rows()); }
    double total_variation() const { return weights.cwiseAbs().sum(); }
    double total_weight() const { return weights.sum(); }
    /// |μ|.
    DiscreteMeasure abs() const { return {locations, weights.cwiseAbs()}; }
};

/// ψ_ε(x) = (2πε)^{-m/2} exp(-‖x‖² / (2ε)). Throws for ε ≤ 0.
double heat_kernel(const Eigen::Ref<const Eigen::VectorXd>& x, double eps);

/// T_ε μ(y) = Σ_k w_k ψ_ε(x_k - y) at every grid node.
DensityField t_eps_measure(const DiscreteMeasure& mu, double eps, const SpatialGrid& grid);

/// T_ε f(y) = ∫ ψ_ε(y - z) f(z) dz by trapezoidal quadrature over the grid,
/// at every grid node. Separable in 2-D.
Eigen::VectorXd t_eps_function(const SpatialGrid& grid, const Eigen::Ref<const Eigen::VectorXd>& f, double eps);

/// Same quadrature evaluated at an arbitrary point.
double t_eps_function_at(const SpatialGrid& grid, const Eigen::Ref<const Eigen::VectorXd>& f, double eps,
                         const Eigen::Ref<const Eigen::VectorXd>& x);

/// (Σ_j w_j v_j²)^{1/2} with trapezoidal weights.
double discrete_l2_norm(const SpatialGrid& grid, const Eigen::Ref<const Eigen::VectorXd>& values);

struct TpropCheck {
    std::string identity;
    double lhs = 0.0;
    double rhs = 0.0;
    double abs_error = 0.0;
    bool pass = false;
};

struct TpropReport {
    std::vector<TpropCheck> checks;
    bool passes() const;
};

/// Inputs for the property suite on one grid.
struct TpropFixture {
    std::string name;
    SpatialGrid grid;
    DiscreteMeasure mu;
    Eigen::VectorXd f;         // test function for (ii) and (iii)
    Eigen::VectorXd phi;       // smooth function for (v)
    Eigen::MatrixXd grad_phi;  // m x nodes, exact gradient of phi
    double eps = 0.1;
};

/// (i)   ‖T_{2ε}|μ|‖ ≤ ‖T_ε|μ|‖
/// (ii)  ‖T_ε f‖ ≤ ‖f‖
/// (iii) ⟨T_ε μ, f⟩ = μ(T_ε f), tolerance 1e-6
/// (v)   ∂_i T_ε φ = T_ε ∂_i φ on nodes at least 8√ε from the boundary, tolerance Δx²
TpropReport tprop_suite(const TpropFixture& fixture);

/// δ-measure, Gaussian and sine fixtures in dimension m.
std::vector<TpropFixture> default_tprop_fixtures(std::size_t m);

/// sup over nodes at least 8√(ε+δ) from the boundary of |T_ε T_δ f - T_{ε+δ} f|.
double semigroup_error(const SpatialGrid& grid, const Eigen::Ref<const Eigen::VectorXd>& f, double eps, double delta);

/// ‖T_ε|μ|‖ over a ladder of ε values.
std::vector<double> smoothing_ladder(const DiscreteMeasure& mu, const SpatialGrid& grid, const std::vector<double>& eps);

}  // namespace bvfilter
