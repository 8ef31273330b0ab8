#include "support.hpp"

#include "bvfilter/error.hpp"
#include "bvfilter/particle.hpp"
#include "bvfilter/simulate.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace bvfilter;
using test::scalar;
using test::vec;

TEST_CASE("particle initialization") {
    test::Linear1D point;
    point.var0 = 0.0;
    point.mean0 = 0.4;
    const ParticleCloud c = pf_init(point.scenario(), 1000, RngStream(1, 0));
    CHECK((c.positions.array() == 0.4).all());
    CHECK((c.log_weights.array() == 0.0).all());

    test::Linear1D g;
    g.mean0 = 1.0;
    g.var0 = 4.0;
    const ParticleCloud big = pf_init(g.scenario(), 100000, RngStream(2, 0));
    CHECK(std::abs(big.positions.mean() - 1.0) < 3.0 * 2.0 / std::sqrt(1e5));

    test::Linear1D kicked = g;
    kicked.jumps = {{0.0, vec(1.0)}};
    const ParticleCloud k = pf_init(kicked.scenario(), 500, RngStream(3, 0));
    const ParticleCloud u = pf_init(g.scenario(), 500, RngStream(3, 0));
    CHECK(k.positions == (u.positions.array() + 1.0).matrix());
    CHECK_THROWS_AS(pf_init(g.scenario(), 0, RngStream(3, 0)), ScenarioError);
}

TEST_CASE("particle step weighting") {
    test::Linear1D zero;
    zero.h = 0.0;
    const Scenario s0 = zero.scenario();
    ParticleCloud c = pf_init(s0, 200, RngStream(1, 0));
    c.log_weights.setLinSpaced(200, -1.0, 1.0);
    RngStream r(5, 0);
    const ParticleCloud next = pf_step(c, s0, 0.0, vec(0.3), r);
    CHECK(next.log_weights == c.log_weights);
    CHECK(next.time == doctest::Approx(0.01));

    test::Linear1D lg;
    lg.s = 0.5;
    const Scenario s = lg.scenario();
    ParticleCloud two;
    two.positions.resize(1, 2);
    two.positions << -1.0, 2.0;
    two.log_weights = Eigen::VectorXd::Zero(2);
    RngStream r2(6, 0);
    const ParticleCloud stepped = pf_step(two, s, 0.0, vec(0.05), r2);
    const double dt = 0.01;
    CHECK(stepped.log_weights[0] == doctest::Approx(-1.0 * 0.05 - 0.5 * dt * 1.0).epsilon(1e-14));
    CHECK(stepped.log_weights[1] == doctest::Approx(2.0 * 0.05 - 0.5 * dt * 4.0).epsilon(1e-14));

    ParticleCloud same;
    same.positions = Eigen::MatrixXd::Constant(1, 10, 0.7);
    same.log_weights = Eigen::VectorXd::Zero(10);
    RngStream r3(7, 0);
    const ParticleCloud ss = pf_step(same, s, 0.0, vec(0.02), r3);
    CHECK((ss.log_weights.array() == ss.log_weights[0]).all());
}

TEST_CASE("resampling") {
    ParticleCloud c;
    c.positions.resize(1, 4);
    c.positions << 1, 2, 3, 4;
    c.log_weights = Eigen::VectorXd::Zero(4);
    c.log_mass = 0.3;
    RngStream r(1, 0);
    const ParticleCloud same = pf_resample(c, 0.5, r);
    CHECK(same.positions == c.positions);
    CHECK(same.log_weights == c.log_weights);

    ParticleCloud single = c;
    const double ninf = -std::numeric_limits<double>::infinity();
    single.log_weights << ninf, 0.0, ninf, ninf;
    CHECK(effective_sample_size(single) == doctest::Approx(1.0));
    const ParticleEstimate before = pf_estimate(single);
    const ParticleCloud out = pf_resample(single, 0.5, r);
    CHECK((out.positions.array() == 2.0).all());
    CHECK(pf_estimate(out).log_mass == before.log_mass);

    ParticleCloud dead = c;
    dead.log_weights.setConstant(ninf);
    try {
        pf_resample(dead, 0.5, r);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(test::contains(e.what(), "filter collapse"));
    }
    CHECK_THROWS_AS(pf_resample(c, 1.5, r), ScenarioError);
    CHECK_THROWS_AS(pf_resample(c, -0.1, r), ScenarioError);
}

TEST_CASE("resampling is unbiased") {
    ParticleCloud c;
    c.positions.resize(1, 5);
    c.positions << -2, -1, 0, 1, 3;
    c.log_weights.resize(5);
    c.log_weights << 0.1, -1.0, 0.5, -0.3, -2.0;
    const ParticleEstimate target = pf_estimate(c);
    const int reps = 20000;
    Eigen::VectorXd means(reps);
    RngStream r(9, 0);
    for (int i = 0; i < reps; ++i) means[i] = pf_resample(c, 1.0, r).positions.mean();
    const MonteCarloEstimate est = monte_carlo_mean(means);
    CHECK(std::abs(est.mean - target.mean[0]) < 3.0 * est.standard_error + 1e-12);
}

TEST_CASE("weighted estimates") {
    ParticleCloud c;
    c.positions.resize(1, 2);
    c.positions << -1.0, 1.0;
    c.log_weights = Eigen::VectorXd::Constant(2, 0.7);
    const ParticleEstimate e = pf_estimate(c);
    CHECK(e.mean[0] == 0.0);
    CHECK(e.cov(0, 0) == doctest::Approx(1.0));
    CHECK(e.log_mass == doctest::Approx(0.7));
    CHECK(e.ess == doctest::Approx(2.0));
    CHECK(log_mean_weight(c.log_weights) == doctest::Approx(0.7));
}

TEST_CASE("particle runs") {
    test::Linear1D lg;
    lg.a = -1.0;
    lg.jumps = {{0.5, vec(0.6)}};
    const Scenario s = lg.scenario();
    const PathBundle b = simulate_bundle(s, Measure::Physical, RngStream(2, 0));
    ParticleOptions opt;
    opt.particles = 300;

    const ParticleRun a = run_particle(s, b.y, opt, RngStream(7, 1));
    const ParticleRun again = run_particle(s, b.y, opt, RngStream(7, 1));
    CHECK(a.means() == again.means());
    opt.jobs = 3;
    const ParticleRun threaded = run_particle(s, b.y, opt, RngStream(7, 1));
    CHECK(a.means() == threaded.means());
    for (std::size_t k = 0; k < a.estimates.size(); ++k) REQUIRE(a.estimates[k].log_mass == threaded.estimates[k].log_mass);
    CHECK(a.track().extras.front().first == "ess");

    test::Linear1D zero = lg;
    zero.h = 0.0;
    const ParticleRun z = run_particle(zero.scenario(), b.y, opt, RngStream(7, 1));
    for (const auto& e : z.estimates) {
        REQUIRE(e.log_mass == 0.0);
        REQUIRE(e.ess == doctest::Approx(300.0));
    }
    CHECK(z.resamples == 0);
    CHECK_THROWS_AS(run_particle(s, b.y.leftCols(50), opt, RngStream(7, 1)), GridError);
}

TEST_CASE("particle order does not matter") {
    test::Linear1D lg;
    lg.s = 0.8;
    const Scenario s = lg.scenario();
    ParticleCloud c = pf_init(s, 64, RngStream(4, 0));
    c.log_weights.setLinSpaced(64, -0.5, 0.5);
    RngStream r(3, 0);
    const ParticleCloud next = pf_step(c, s, 0.0, vec(0.04), r);

    std::vector<Eigen::Index> perm(64);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    ParticleCloud shuffled = next;
    for (Eigen::Index i = 0; i < 64; ++i) {
        shuffled.positions.col(i) = next.positions.col(perm[static_cast<std::size_t>(i)]);
        shuffled.log_weights[i] = next.log_weights[perm[static_cast<std::size_t>(i)]];
    }
    const ParticleEstimate e1 = pf_estimate(next), e2 = pf_estimate(shuffled);
    CHECK(std::abs(e1.mean[0] - e2.mean[0]) < 1e-12);
    CHECK(std::abs(e1.cov(0, 0) - e2.cov(0, 0)) < 1e-12);
    CHECK(std::abs(e1.log_mass - e2.log_mass) < 1e-12);
}

TEST_CASE("deterministic particles follow the signal") {
    test::Linear1D lg;
    lg.a = -0.5;
    lg.c = 0.2;
    lg.s = 0.0;
    lg.var0 = 0.0;
    lg.mean0 = 1.2;
    lg.jumps = {{0.3, vec(-0.4)}, {0.8, vec(0.9)}};
    lg.knots = {{0.5, vec(0.25)}, {1.0, vec(0.0)}};
    const Scenario s = lg.scenario();
    RngStream sr(1, 0);
    const SignalPath path = simulate_signal(s, sr);
    const PathBundle b = simulate_bundle(s, Measure::Physical, RngStream(3, 0));
    ParticleOptions opt;
    opt.particles = 50;
    const ParticleRun run = run_particle(s, b.y, opt, RngStream(5, 0));
    CHECK((run.means() - path.x).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("unnormalized mass is a martingale under the reference measure") {
    test::Linear1D lg;
    lg.a = -1.0;
    lg.steps = 50;
    const Scenario s = lg.scenario();
    ParticleOptions opt;
    opt.particles = 100;
    const int reps = 1000;
    Eigen::VectorXd mass(reps);
    for (int r = 0; r < reps; ++r) {
        const auto seed = static_cast<std::uint64_t>(r + 1);
        const PathBundle b = simulate_bundle(s, Measure::Reference, RngStream(seed, 0));
        mass[r] = std::exp(run_particle(s, b.y, opt, RngStream(seed, 1)).estimates.back().log_mass);
    }
    const MonteCarloEstimate est = monte_carlo_mean(mass);
    CHECK(std::abs(est.mean - 1.0) < 3.0 * est.standard_error);
}

TEST_CASE("non-finite particles are reported") {
    test::Linear1D lg;
    lg.mean0 = 10.0;
    lg.var0 = 0.0;
    ScenarioSpec sp = lg.spec();
    sp.drift = std::make_shared<FunctionField>(1, 1, [](double, const Eigen::VectorXd& x) {
        return Eigen::VectorXd(x.array().cube() * 1e3);
    });
    sp.observation = std::make_shared<ZeroField>(1, 1);
    const Scenario s(sp);
    ParticleOptions opt;
    opt.particles = 10;
    try {
        run_particle(s, Eigen::MatrixXd::Zero(1, 101), opt, RngStream(1, 0));
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(test::contains(e.what(), "time step"));
    }
}
