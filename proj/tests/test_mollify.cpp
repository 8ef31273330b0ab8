#include "support.hpp"

#include "bvfilter/error.hpp"
#include "bvfilter/mollify.hpp"

#include <doctest.h>

using namespace bvfilter;
using test::vec;

TEST_CASE("heat kernel values") {
    CHECK(heat_kernel(vec(0.0), 1.0) == doctest::Approx(0.398942).epsilon(1e-6));
    CHECK(heat_kernel(Eigen::Vector2d::Zero(), 0.3) == doctest::Approx(1.0 / (2.0 * M_PI * 0.3)));
    CHECK(heat_kernel(vec(0.7), 0.2) == heat_kernel(vec(-0.7), 0.2));
    CHECK(heat_kernel(Eigen::Vector2d(0.3, -0.4), 0.5) ==
          doctest::Approx(std::exp(-0.25 / 1.0) / (2.0 * M_PI * 0.5)));
    CHECK_THROWS_AS(heat_kernel(vec(0.0), 0.0), Error);
    CHECK_THROWS_AS(heat_kernel(vec(0.0), -1.0), Error);
}

TEST_CASE("smoothing a measure") {
    const SpatialGrid grid = SpatialGrid::uniform_1d(-8, 8, 801);
    const DensityField d = t_eps_measure(DiscreteMeasure::dirac(vec(0.0)), 1.0, grid);
    for (std::size_t j = 0; j < grid.size(); j += 37)
        CHECK(d.values[static_cast<Eigen::Index>(j)] == doctest::Approx(heat_kernel(vec(grid.coordinate(0, j)), 1.0)));

    DiscreteMeasure cancel;
    cancel.locations = Eigen::MatrixXd::Constant(1, 2, 0.5);
    cancel.weights = Eigen::Vector2d(1.0, -1.0);
    CHECK(t_eps_measure(cancel, 0.5, grid).values.cwiseAbs().maxCoeff() == 0.0);

    DiscreteMeasure mu;
    mu.locations.resize(1, 3);
    mu.locations << -1.0, 0.2, 1.5;
    mu.weights = Eigen::Vector3d(0.5, 2.0, -0.7);
    CHECK(std::abs(t_eps_measure(mu, 0.3, grid).raw_mass() - mu.total_weight()) <= 1e-8);
    CHECK(mu.total_variation() == doctest::Approx(3.2));
    CHECK(mu.abs().total_weight() == doctest::Approx(3.2));
}

TEST_CASE("smoothing a function") {
    const SpatialGrid grid = SpatialGrid::uniform_1d(-10, 10, 401);
    const double dx2 = grid.spacing(0) * grid.spacing(0);
    const double eps = 0.5;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(401);
    const Eigen::VectorXd t1 = t_eps_function(grid, ones, eps);
    CHECK((t1.segment(100, 201).array() - 1.0).abs().maxCoeff() < 1e-12);

    const double v = 0.8;
    Eigen::VectorXd f(401), expected(401);
    for (Eigen::Index j = 0; j < 401; ++j) {
        const double x = grid.coordinate(0, static_cast<std::size_t>(j));
        f[j] = std::exp(-x * x / (2 * v));
        expected[j] = std::sqrt(v / (v + eps)) * std::exp(-x * x / (2 * (v + eps)));
    }
    const Eigen::VectorXd tf = t_eps_function(grid, f, eps);
    CHECK((tf - expected).cwiseAbs().maxCoeff() <= dx2);
    CHECK(t_eps_function_at(grid, f, eps, vec(0.123)) ==
          doctest::Approx(std::sqrt(v / (v + eps)) * std::exp(-0.123 * 0.123 / (2 * (v + eps)))).epsilon(1e-6));
    CHECK(discrete_l2_norm(grid, tf) <= discrete_l2_norm(grid, f));
    CHECK_THROWS_AS(t_eps_function(grid, Eigen::VectorXd::Ones(5), eps), GridError);

    const SpatialGrid g2({-6, -6}, {6, 6}, {121, 121});
    const Eigen::MatrixXd pts = g2.points();
    Eigen::VectorXd f2(static_cast<Eigen::Index>(g2.size())), e2(f2.size());
    for (Eigen::Index j = 0; j < f2.size(); ++j) {
        const double r2 = pts.col(j).squaredNorm();
        f2[j] = std::exp(-r2 / (2 * v));
        e2[j] = v / (v + eps) * std::exp(-r2 / (2 * (v + eps)));
    }
    CHECK((t_eps_function(g2, f2, eps) - e2).cwiseAbs().maxCoeff() <= g2.spacing(0) * g2.spacing(0));
}

TEST_CASE("property suite on known inputs") {
    TpropFixture fx;
    fx.name = "dirac";
    fx.grid = SpatialGrid::uniform_1d(-8, 8, 801);
    fx.eps = 0.25;
    fx.mu = DiscreteMeasure::dirac(vec(0.0));
    const Eigen::VectorXd x = fx.grid.points().row(0).transpose();
    fx.f = (-0.5 * x.array().square()).exp().matrix();
    fx.phi = x.array().sin().matrix();
    fx.grad_phi = x.array().cos().matrix().transpose();
    const TpropReport rep = tprop_suite(fx);
    REQUIRE(rep.checks.size() == 4);
    CHECK(rep.passes());
    // ‖ψ_2ε‖ = (8πε)^{-1/4}, ‖ψ_ε‖ = (4πε)^{-1/4}
    CHECK(rep.checks[0].lhs == doctest::Approx(std::pow(8 * M_PI * 0.25, -0.25)).epsilon(1e-6));
    CHECK(rep.checks[0].rhs == doctest::Approx(std::pow(4 * M_PI * 0.25, -0.25)).epsilon(1e-6));
    // ⟨T_ε δ_0, f⟩ = T_ε f(0) = (1 / (1 + ε))^{1/2}
    CHECK(rep.checks[2].lhs == doctest::Approx(std::sqrt(1.0 / 1.25)).epsilon(1e-6));
    CHECK(rep.checks[2].rhs == doctest::Approx(std::sqrt(1.0 / 1.25)).epsilon(1e-6));
    CHECK(rep.checks[3].abs_error <= fx.grid.spacing(0) * fx.grid.spacing(0));
}

TEST_CASE("default fixtures pass in one and two dimensions") {
    for (std::size_t m : {1, 2}) {
        for (const auto& fx : default_tprop_fixtures(m)) {
            CAPTURE(fx.name);
            const TpropReport rep = tprop_suite(fx);
            for (const auto& c : rep.checks) {
                CAPTURE(c.identity);
                CHECK(c.pass);
            }
        }
    }
    CHECK_THROWS_AS(default_tprop_fixtures(3), GridError);
}

TEST_CASE("semigroup and smoothing ladder") {
    const SpatialGrid grid = SpatialGrid::uniform_1d(-10, 10, 801);
    Eigen::VectorXd bump(801);
    for (Eigen::Index j = 0; j < 801; ++j) {
        const double x = grid.coordinate(0, static_cast<std::size_t>(j));
        bump[j] = std::abs(x) < 1.0 ? std::exp(-1.0 / (1.0 - x * x)) : 0.0;
    }
    CHECK(semigroup_error(grid, bump, 0.2, 0.3) <= 2e-6);

    DiscreteMeasure mu;
    mu.locations.resize(1, 2);
    mu.locations << -1.0, 2.0;
    mu.weights = Eigen::Vector2d(1.0, -0.5);
    const std::vector<double> ladder = smoothing_ladder(mu, grid, {0.05, 0.1, 0.2, 0.4, 0.8});
    REQUIRE(ladder.size() == 5);
    for (std::size_t i = 1; i < ladder.size(); ++i) CHECK(ladder[i] <= ladder[i - 1]);
}
