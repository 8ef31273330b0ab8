#include "bvfilter/simulate.hpp"

#include "bvfilter/error.hpp"
#include "bvfilter/parallel.hpp"

#include <cmath>
#include <string>

namespace bvfilter {

namespace {

void check_finite(const Eigen::Ref<const Eigen::MatrixXd>& v, const char* who, std::size_t k, double t) {
    if (!v.allFinite())
        throw NumericalError(std::string(who) + ": non-finite value at time step " + std::to_string(k) +
                             " (t = " + std::to_string(t) + ")");
}

Eigen::VectorXd draw_normals(RngStream& rng, Eigen::Index count, double scale) {
    Eigen::VectorXd z(count);
    for (Eigen::Index i = 0; i < count; ++i) z[i] = scale * rng.normal();
    return z;
}

/// Paths [begin, end) advanced together; each column owns its rng substreams.
void simulate_block(const Scenario& s, Measure measure, const RngStream& rng, std::size_t begin, std::size_t end,
                    EnsembleTerminal& out) {
    const auto m = static_cast<Eigen::Index>(s.m());
    const auto n = static_cast<Eigen::Index>(s.n());
    const auto d = static_cast<Eigen::Index>(s.d());
    const auto count = static_cast<Eigen::Index>(end - begin);
    const auto& grid = s.time();
    const double dt = grid.dt();
    const double sqdt = std::sqrt(dt);

    std::vector<RngStream> signal_rng, obs_rng;
    signal_rng.reserve(end - begin);
    obs_rng.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        const RngStream path = rng.substream(i);
        signal_rng.push_back(path.substream(0));
        obs_rng.push_back(path.substream(1));
    }

    Eigen::MatrixXd x(m, count);
    for (Eigen::Index j = 0; j < count; ++j) x.col(j) = s.xi().sample(signal_rng[static_cast<std::size_t>(j)]);
    x.colwise() += s.nu().jump_at(0);
    Eigen::MatrixXd y = s.y0().replicate(1, count);
    Eigen::VectorXd log_eta = Eigen::VectorXd::Zero(count);
    Eigen::MatrixXd dw(d, count), z(n, count);

    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double t = grid.time(k);
        const Eigen::MatrixXd gamma = s.gamma().at(t);
        const Eigen::MatrixXd ginv = s.gamma_inverse(t);
        const Eigen::MatrixXd hx = s.observation().evaluate(t, x);
        const Eigen::MatrixXd g = ginv * hx;
        for (Eigen::Index j = 0; j < count; ++j) {
            auto& sr = signal_rng[static_cast<std::size_t>(j)];
            auto& orng = obs_rng[static_cast<std::size_t>(j)];
            for (Eigen::Index a = 0; a < d; ++a) dw(a, j) = sqdt * sr.normal();
            for (Eigen::Index a = 0; a < n; ++a) z(a, j) = sqdt * orng.normal();
        }
        Eigen::MatrixXd dbbar;
        if (measure == Measure::Reference) {
            dbbar = z;
            y += gamma * z;
        } else {
            const Eigen::MatrixXd dy = hx * dt + gamma * z;
            y += dy;
            dbbar = ginv * dy;
        }
        log_eta += ((g.array() * dbbar.array()).colwise().sum() - 0.5 * dt * g.array().square().colwise().sum())
                       .transpose()
                       .matrix();
        x += s.drift().evaluate(t, x) * dt + s.diffusion().apply(t, x, dw);
        x.colwise() += s.nu().continuous_increments().col(static_cast<Eigen::Index>(k));
        if (s.nu().has_jump(k + 1)) x.colwise() += s.nu().jump_at(k + 1);
        check_finite(x, "simulate_terminal", k, t);
    }
    const auto first = static_cast<Eigen::Index>(begin);
    out.x.middleCols(first, count) = x;
    out.y.middleCols(first, count) = y;
    out.log_eta.segment(first, count) = log_eta;
}

}  // namespace

SignalPath simulate_signal(const Scenario& s, RngStream& rng) {
    s.require_valid("simulate_signal");
    const auto m = static_cast<Eigen::Index>(s.m());
    const auto d = static_cast<Eigen::Index>(s.d());
    const auto& grid = s.time();
    const auto nodes = static_cast<Eigen::Index>(grid.nodes());
    const double dt = grid.dt();
    const double sqdt = std::sqrt(dt);

    SignalPath path;
    path.x.resize(m, nodes);
    path.x_pre.resize(m, nodes);
    path.dw.resize(d, nodes - 1);

    path.x_pre.col(0) = s.xi().sample(rng);
    path.x.col(0) = path.x_pre.col(0) + s.nu().jump_at(0);
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double t = grid.time(k);
        path.dw.col(kk) = draw_normals(rng, d, sqdt);
        const Eigen::MatrixXd xk = path.x.col(kk);
        Eigen::VectorXd next = xk + s.drift().evaluate(t, xk) * dt + s.diffusion().apply(t, xk, path.dw.col(kk)) +
                               s.nu().continuous_increments().col(kk);
        check_finite(next, "simulate_signal", k, t);
        path.x_pre.col(kk + 1) = next;
        if (s.nu().has_jump(k + 1)) next += s.nu().jump_at(k + 1);
        path.x.col(kk + 1) = next;
    }
    return path;
}

ObservationPath simulate_observation_reference(const Scenario& s, RngStream& rng) {
    s.require_valid("simulate_observation_reference");
    const auto n = static_cast<Eigen::Index>(s.n());
    const auto& grid = s.time();
    const auto nodes = static_cast<Eigen::Index>(grid.nodes());
    const double sqdt = std::sqrt(grid.dt());

    ObservationPath obs;
    obs.y.resize(n, nodes);
    obs.noise.resize(n, nodes - 1);
    obs.y.col(0) = s.y0();
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        obs.noise.col(kk) = draw_normals(rng, n, sqdt);
        obs.y.col(kk + 1) = obs.y.col(kk) + s.gamma().at(grid.time(k)) * obs.noise.col(kk);
        check_finite(obs.y.col(kk + 1), "simulate_observation_reference", k, grid.time(k));
    }
    return obs;
}

ObservationPath simulate_observation_physical(const Scenario& s, const Eigen::MatrixXd& x, RngStream& rng) {
    s.require_valid("simulate_observation_physical");
    const auto& grid = s.time();
    if (x.cols() != static_cast<Eigen::Index>(grid.nodes()) || x.rows() != static_cast<Eigen::Index>(s.m()))
        throw GridError("simulate_observation_physical: signal path does not match the scenario time grid");
    const auto n = static_cast<Eigen::Index>(s.n());
    const auto nodes = x.cols();
    const double dt = grid.dt();
    const double sqdt = std::sqrt(dt);

    ObservationPath obs;
    obs.y.resize(n, nodes);
    obs.noise.resize(n, nodes - 1);
    obs.y.col(0) = s.y0();
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double t = grid.time(k);
        obs.noise.col(kk) = draw_normals(rng, n, sqdt);
        obs.y.col(kk + 1) = obs.y.col(kk) + s.observation().evaluate(t, x.col(kk)) * dt + s.gamma().at(t) * obs.noise.col(kk);
        check_finite(obs.y.col(kk + 1), "simulate_observation_physical", k, t);
    }
    return obs;
}

Eigen::VectorXd girsanov_log_density(const Scenario& s, const Eigen::MatrixXd& x, const Eigen::MatrixXd& dbbar) {
    const auto& grid = s.time();
    const auto steps = static_cast<Eigen::Index>(grid.steps());
    if (x.cols() != steps + 1 || dbbar.cols() != steps || dbbar.rows() != static_cast<Eigen::Index>(s.n()))
        throw GridError("girsanov_log_density: paths are not on a common grid");
    const double dt = grid.dt();
    Eigen::VectorXd log_eta(steps + 1);
    log_eta[0] = 0.0;
    for (Eigen::Index k = 0; k < steps; ++k) {
        const double t = grid.time(static_cast<std::size_t>(k));
        const Eigen::VectorXd g = s.gamma_inverse(t) * s.observation().evaluate(t, x.col(k));
        log_eta[k + 1] = log_eta[k] + g.dot(dbbar.col(k)) - 0.5 * g.squaredNorm() * dt;
    }
    return log_eta;
}

Eigen::MatrixXd reference_increments(const Scenario& s, const Eigen::MatrixXd& y) {
    const auto& grid = s.time();
    const auto steps = static_cast<Eigen::Index>(grid.steps());
    if (y.cols() != steps + 1 || y.rows() != static_cast<Eigen::Index>(s.n()))
        throw GridError("observation path does not match the scenario time grid");
    Eigen::MatrixXd out(y.rows(), steps);
    for (Eigen::Index k = 0; k < steps; ++k)
        out.col(k) = s.gamma_inverse(grid.time(static_cast<std::size_t>(k))) * (y.col(k + 1) - y.col(k));
    return out;
}

PathBundle simulate_bundle(const Scenario& s, Measure measure, const RngStream& rng) {
    RngStream signal_rng = rng.substream(0);
    RngStream obs_rng = rng.substream(1);
    SignalPath sig = simulate_signal(s, signal_rng);
    PathBundle b;
    const auto& grid = s.time();
    for (std::size_t k = 0; k < grid.nodes(); ++k) b.t.push_back(grid.time(k));
    if (measure == Measure::Reference) {
        ObservationPath obs = simulate_observation_reference(s, obs_rng);
        b.y = std::move(obs.y);
        b.dbbar = std::move(obs.noise);
    } else {
        ObservationPath obs = simulate_observation_physical(s, sig.x, obs_rng);
        b.y = std::move(obs.y);
        b.dbbar = reference_increments(s, b.y);
    }
    b.log_eta = girsanov_log_density(s, sig.x, b.dbbar);
    b.x = std::move(sig.x);
    b.x_pre = std::move(sig.x_pre);
    b.dw = std::move(sig.dw);
    return b;
}

EnsembleTerminal simulate_terminal(const Scenario& s, Measure measure, const RngStream& rng, std::size_t paths,
                                   unsigned jobs) {
    s.require_valid("simulate_terminal");
    EnsembleTerminal out;
    const auto count = static_cast<Eigen::Index>(paths);
    out.x.resize(static_cast<Eigen::Index>(s.m()), count);
    out.y.resize(static_cast<Eigen::Index>(s.n()), count);
    out.log_eta.resize(count);
    constexpr std::size_t kBlock = 4096;
    const std::size_t blocks = (paths + kBlock - 1) / kBlock;
    parallel_for(blocks, jobs, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b)
            simulate_block(s, measure, rng, b * kBlock, std::min(paths, (b + 1) * kBlock), out);
    });
    return out;
}

MonteCarloEstimate monte_carlo_mean(const Eigen::Ref<const Eigen::VectorXd>& samples) {
    MonteCarloEstimate est;
    const auto n = static_cast<double>(samples.size());
    if (samples.size() == 0) return est;
    est.mean = samples.mean();
    if (samples.size() > 1) {
        const double var = (samples.array() - est.mean).square().sum() / (n - 1.0);
        est.standard_error = std::sqrt(var / n);
    }
    return est;
}

}  // namespace bvfilter
