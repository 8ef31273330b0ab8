#include "support.hpp"

#include "bvfilter/error.hpp"
#include "bvfilter/rng.hpp"

#include <doctest.h>

#include <set>

using namespace bvfilter;
using test::scalar;
using test::vec;

TEST_CASE("philox known answers") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(Philox4x32::generate({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("rng streams are reproducible and distinct") {
    RngStream a(7, 3), b(7, 3), c(7, 4);
    for (int i = 0; i < 100; ++i) {
        const double x = a.normal();
        CHECK(x == b.normal());
        CHECK(x != c.normal());
    }
    std::set<std::uint64_t> ids;
    const RngStream root(1, 0);
    for (std::uint64_t i = 0; i < 1000; ++i) ids.insert(root.substream(i).stream());
    CHECK(ids.size() == 1000);
    CHECK(root.substream(5).stream() == RngStream(1, 0).substream(5).stream());
}

TEST_CASE("rng moments") {
    RngStream r(11, 0);
    const int n = 200000;
    double s1 = 0, s2 = 0, u1 = 0;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s1 += z;
        s2 += z * z;
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        u1 += u;
    }
    CHECK(std::abs(s1 / n) < 4.0 / std::sqrt(n));
    CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(u1 / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("time grid") {
    const TimeGrid g(1.0, 10);
    CHECK(g.nodes() == 11);
    CHECK(g.dt() == doctest::Approx(0.1));
    CHECK(g.node_index(0.3) == 3);
    CHECK(g.node_index(1.0) == 10);
    CHECK_THROWS_AS(g.node_index(0.35), GridError);
    CHECK(g.nearest_node(0.36) == 4);
    CHECK_THROWS_AS(TimeGrid(1.0, 0), GridError);
    CHECK_THROWS_AS(TimeGrid(-1.0, 10), GridError);
    CHECK(g.refined(4).steps() == 40);
}

TEST_CASE("spatial grid") {
    CHECK_THROWS_AS(SpatialGrid::uniform_1d(0, 1, 2), GridError);
    CHECK_THROWS_AS(SpatialGrid::uniform_1d(1, 0, 5), GridError);
    const SpatialGrid g1 = SpatialGrid::uniform_1d(-1, 1, 5);
    CHECK(g1.spacing(0) == doctest::Approx(0.5));
    CHECK(g1.trapezoid_weights().sum() == doctest::Approx(2.0));
    CHECK(g1.refined().count(0) == 9);

    const SpatialGrid g2({0, -1}, {2, 1}, {3, 5});
    CHECK(g2.size() == 15);
    CHECK(g2.trapezoid_weights().sum() == doctest::Approx(4.0));
    const auto idx = g2.unflatten(g2.flatten(2, 3));
    CHECK(idx[0] == 2);
    CHECK(idx[1] == 3);
    CHECK(g2.stride(0) == 5);
    const Eigen::MatrixXd pts = g2.points();
    CHECK(pts(0, g2.flatten(1, 4)) == doctest::Approx(1.0));
    CHECK(pts(1, g2.flatten(1, 4)) == doctest::Approx(1.0));
}

TEST_CASE("multilinear interpolation") {
    const SpatialGrid g({0, 0}, {1, 1}, {3, 3});
    const Eigen::MatrixXd pts = g.points();
    const Eigen::VectorXd f = (2.0 * pts.row(0) + 3.0 * pts.row(1)).transpose().array() + 1.0;
    Eigen::Vector2d x(0.3, 0.7);
    CHECK(interpolate(g, f, x) == doctest::Approx(1.0 + 0.6 + 2.1));
    x << 1.5, 0.5;
    CHECK(interpolate(g, f, x) == 0.0);
}

TEST_CASE("bv total variation examples") {
    const TimeGrid g(1.0, 10);
    const BVPath jumps(g, 1, {{0.3, vec(1.0)}, {0.6, vec(-0.5)}}, {}, 2.0);
    CHECK(bv_total_variation(jumps, 0) == doctest::Approx(1.5));
    CHECK(bv_total_variation(BVPath::zero(g, 1), 0) == 0.0);
    const BVPath ramp(g, 1, {}, {{1.0, vec(0.3)}}, 1.0);
    CHECK(bv_total_variation(ramp, 0) == doctest::Approx(0.3));
}

TEST_CASE("bv increments") {
    const TimeGrid g(1.0, 10);
    const BVPath slope(g, 1, {}, {{1.0, vec(0.2)}}, 1.0);
    auto inc = bv_increment(slope, 0.2, 0.3);
    CHECK(inc.continuous[0] == doctest::Approx(0.02));
    CHECK_FALSE(inc.jump.has_value());

    const BVPath kick(g, 1, {{0.3, vec(1.0)}}, {}, 2.0);
    inc = bv_increment(kick, 0.2, 0.3);
    CHECK(inc.continuous[0] == 0.0);
    REQUIRE(inc.jump.has_value());
    CHECK((*inc.jump)[0] == 1.0);

    const BVPath both(g, 1, {{0.3, vec(1.0)}}, {{1.0, vec(0.2)}}, 2.0);
    inc = bv_increment(both, 0.2, 0.3);
    CHECK(inc.continuous[0] == doctest::Approx(0.02));
    REQUIRE(inc.jump.has_value());
    CHECK((*inc.jump)[0] == 1.0);

    CHECK_THROWS_AS(bv_increment(both, 0.2, 0.4), GridError);
    CHECK_THROWS_AS(bv_increment(both, 0.25, 0.35), GridError);
}

TEST_CASE("bv path reconstructs node values from increments") {
    const TimeGrid g(1.0, 97);
    const BVPath nu(g, 2,
                    {{0.0, Eigen::Vector2d(0.1, -0.2)}, {0.41, Eigen::Vector2d(0.7, 0.0)}, {0.93, Eigen::Vector2d(-0.3, 0.4)}},
                    {{0.3, Eigen::Vector2d(0.2, 0.1)}, {0.8, Eigen::Vector2d(-0.1, 0.5)}}, 5.0);
    Eigen::VectorXd acc = nu.jump_at(0);
    CHECK(acc == nu.value(0));
    for (std::size_t k = 0; k < g.steps(); ++k) {
        const BVIncrement inc = nu.increment(k);
        acc += inc.continuous;
        if (inc.jump) acc += *inc.jump;
        REQUIRE(acc == nu.value(k + 1));
    }
    CHECK(nu.jumps().size() == 3);
    for (const auto& j : nu.jumps()) CHECK_NOTHROW(g.node_index(j.time));
    CHECK_THROWS_AS(BVPath(g, 1, {{1.5, vec(1.0)}}, {}, 2.0), GridError);
}

TEST_CASE("validate scenario") {
    test::Linear1D base;
    base.jumps = {{0.5, vec(0.5)}};
    base.fuel = 1.0;
    CHECK(validate_scenario(base.spec()).passes());

    ScenarioSpec sp = base.spec();
    sp.gamma = std::make_shared<ConstantNoise>(scalar(0.0));
    ValidationReport rep = validate_scenario(sp);
    CHECK(rep.has("gamma_pd"));
    CHECK(test::contains(rep.summary(), "gamma not uniformly positive definite"));

    test::Linear1D greedy = base;
    greedy.jumps = {{0.5, vec(2.0)}};
    rep = validate_scenario(greedy.spec());
    CHECK(rep.has("fuel"));
    CHECK(test::contains(rep.summary(), "fuel bound exceeded"));

    sp = base.spec();
    sp.drift.reset();
    CHECK_NOTHROW(rep = validate_scenario(sp));
    CHECK(rep.has("missing_coefficient"));

    sp = base.spec();
    sp.y0 = Eigen::VectorXd::Zero(2);
    CHECK(validate_scenario(sp).has("dimension"));

    test::Linear1D bounded = base;
    bounded.nodes = 33;
    bounded.a = -1.0;
    sp = bounded.spec();
    sp.drift_bound = 4.0;
    CHECK(validate_scenario(sp).has("drift_bound"));
    sp.drift_bound = 8.0;
    sp.observation_bound = 8.0;
    sp.diffusion_bound = 0.5;
    CHECK(validate_scenario(sp).passes());

    const Scenario bad(greedy.spec());
    CHECK_FALSE(bad.validation().passes());
    CHECK_THROWS_AS(bad.require_valid("test"), ScenarioError);
}

TEST_CASE("initial law") {
    const InitialLaw g = InitialLaw::gaussian(vec(1.0), scalar(0.25));
    CHECK(g.square_integrable());
    const InitialLaw point = InitialLaw::gaussian(vec(1.0), scalar(0.0));
    CHECK_FALSE(point.square_integrable());
    RngStream r(1, 0);
    CHECK(point.sample(r)[0] == 1.0);
    const SpatialGrid grid = SpatialGrid::uniform_1d(-5, 5, 11);
    CHECK_THROWS_AS(point.density_on(grid), ScenarioError);

    const InitialLaw mix = InitialLaw::mixture({{1.0, vec(-1.0), scalar(0.5)}, {3.0, vec(1.0), scalar(0.5)}});
    CHECK(mix.mean()[0] == doctest::Approx(0.5));
    CHECK(mix.covariance()(0, 0) == doctest::Approx(0.5 + 0.75));

    test::Linear1D lg;
    lg.var0 = 0.0;
    const ValidationReport rep = validate_scenario(lg.spec());
    CHECK(rep.passes());
    CHECK_FALSE(rep.xi_square_integrable);
}

TEST_CASE("linear-Gaussian detection and grid changes") {
    test::Linear1D lg;
    lg.jumps = {{0.5, vec(0.5)}};
    const Scenario s = lg.scenario();
    REQUIRE(s.linear().has_value());
    CHECK(s.linear()->A(0, 0) == 0.0);
    CHECK_FALSE(s.observation_is_zero());
    const Scenario fine = s.with_time_grid(TimeGrid(1.0, 400));
    CHECK(fine.time().steps() == 400);
    CHECK(fine.nu().has_jump(200));
    CHECK(fine.validation().passes());

    ScenarioSpec sp = lg.spec();
    sp.drift = std::make_shared<ClippedCubicField>(1, 1.0, 4.0);
    CHECK_FALSE(Scenario(sp).linear().has_value());
}
