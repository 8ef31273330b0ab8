#include "bvfilter/particle.hpp"

#include "bvfilter/error.hpp"
#include "bvfilter/parallel.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace bvfilter {

namespace {

// Renormalize log-weights only when they drift far from 0.
constexpr double kLogWeightDrift = 50.0;

double max_log_weight(const Eigen::Ref<const Eigen::VectorXd>& lw) {
    const double top = lw.maxCoeff();
    if (!(top > -std::numeric_limits<double>::infinity()) || std::isnan(top))
        throw NumericalError("filter collapse: all particle weights vanished");
    return top;
}

struct Weights {
    Eigen::VectorXd w;  // normalized
    double log_mean = 0.0;
};

Weights normalized_weights(const Eigen::Ref<const Eigen::VectorXd>& lw) {
    const double top = max_log_weight(lw);
    Weights out{(lw.array() - top).exp().matrix(), 0.0};
    const double sum = out.w.sum();
    out.w /= sum;
    out.log_mean = top + std::log(sum / static_cast<double>(lw.size()));
    return out;
}

}  // namespace

ParticleCloud pf_init(const Scenario& s, std::size_t particles, const RngStream& rng) {
    s.require_valid("pf_init");
    if (particles == 0) throw ScenarioError("pf_init: need at least one particle");
    ParticleCloud cloud;
    const auto n = static_cast<Eigen::Index>(particles);
    cloud.positions.resize(static_cast<Eigen::Index>(s.m()), n);
    for (Eigen::Index i = 0; i < n; ++i) {
        RngStream r = rng.substream(static_cast<std::uint64_t>(i));
        cloud.positions.col(i) = s.xi().sample(r);
    }
    cloud.positions.colwise() += s.nu().jump_at(0);
    cloud.log_weights = Eigen::VectorXd::Zero(n);
    cloud.log_mass = 0.0;
    cloud.time = 0.0;
    return cloud;
}

ParticleCloud pf_step(const ParticleCloud& cloud, const Scenario& s, double t_k,
                      const Eigen::Ref<const Eigen::VectorXd>& dy, RngStream& rng, unsigned jobs) {
    const auto& grid = s.time();
    const std::size_t k = grid.node_index(t_k);
    if (k >= grid.steps()) throw GridError("pf_step: t_k is the final node");
    const double dt = grid.dt();
    const double sqdt = std::sqrt(dt);
    const auto d = static_cast<Eigen::Index>(s.d());
    const Eigen::MatrixXd ginv = s.gamma_inverse(t_k);
    const Eigen::VectorXd dbbar = ginv * dy;
    const Eigen::VectorXd dnu = s.nu().continuous_increments().col(static_cast<Eigen::Index>(k));
    const bool jump = s.nu().has_jump(k + 1);
    const Eigen::VectorXd jump_size = s.nu().jump_at(k + 1);

    ParticleCloud out = cloud;
    const RngStream step_rng(rng.seed(), rng.bits());
    const std::size_t n = cloud.size();
    const std::size_t chunks = (n + kParticleChunk - 1) / kParticleChunk;

    parallel_for(chunks, jobs, [&](std::size_t c0, std::size_t c1) {
        const auto begin = static_cast<Eigen::Index>(c0 * kParticleChunk);
        const auto count = static_cast<Eigen::Index>(std::min(n, c1 * kParticleChunk)) - begin;
        const auto x = cloud.positions.middleCols(begin, count);
        const Eigen::MatrixXd g = ginv.lazyProduct(s.observation().evaluate(t_k, x));
        out.log_weights.segment(begin, count).array() +=
            ((g.array().colwise() * dbbar.array()).colwise().sum() - 0.5 * dt * g.array().square().colwise().sum())
                .transpose();

        Eigen::MatrixXd dw(d, count);
        for (std::size_t c = c0; c < c1; ++c) {
            RngStream r = step_rng.substream(c);
            const auto lo = static_cast<Eigen::Index>(c * kParticleChunk) - begin;
            const auto hi = std::min(count, lo + static_cast<Eigen::Index>(kParticleChunk));
            for (Eigen::Index j = lo; j < hi; ++j)
                for (Eigen::Index a = 0; a < d; ++a) dw(a, j) = sqdt * r.normal();
        }
        auto next = out.positions.middleCols(begin, count);
        next += s.drift().evaluate(t_k, x) * dt + s.diffusion().apply(t_k, x, dw);
        next.colwise() += dnu;
        if (jump) next.colwise() += jump_size;
    });

    if (!out.positions.allFinite())
        throw NumericalError("pf_step: non-finite particle position at time step " + std::to_string(k));
    const double top = max_log_weight(out.log_weights);
    if (std::abs(top) > kLogWeightDrift) {
        out.log_weights.array() -= top;
        out.log_mass += top;
    }
    out.time = grid.time(k + 1);
    return out;
}

double log_mean_weight(const Eigen::Ref<const Eigen::VectorXd>& log_weights) {
    const double top = max_log_weight(log_weights);
    return top + std::log((log_weights.array() - top).exp().mean());
}

double effective_sample_size(const ParticleCloud& cloud) {
    return 1.0 / normalized_weights(cloud.log_weights).w.squaredNorm();
}

ParticleCloud pf_resample(const ParticleCloud& cloud, double threshold, RngStream& rng) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ScenarioError("pf_resample: threshold must lie in [0, 1]");
    const Weights nw = normalized_weights(cloud.log_weights);
    const Eigen::VectorXd& w = nw.w;
    const std::size_t n = cloud.size();
    const double ess = 1.0 / w.squaredNorm();
    if (!(ess / static_cast<double>(n) < threshold)) return cloud;

    ParticleCloud out;
    out.time = cloud.time;
    out.log_mass = cloud.log_mass + nw.log_mean;
    out.log_weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    out.positions.resize(cloud.positions.rows(), static_cast<Eigen::Index>(n));
    const double step = 1.0 / static_cast<double>(n);
    const double u0 = rng.uniform() * step;
    double cumulative = w[0];
    Eigen::Index src = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = u0 + static_cast<double>(i) * step;
        while (u > cumulative && src + 1 < w.size()) cumulative += w[++src];
        out.positions.col(static_cast<Eigen::Index>(i)) = cloud.positions.col(src);
    }
    return out;
}

ParticleEstimate pf_estimate(const ParticleCloud& cloud) {
    const Weights nw = normalized_weights(cloud.log_weights);
    const Eigen::VectorXd& w = nw.w;
    ParticleEstimate est;
    est.mean = cloud.positions * w;
    const Eigen::MatrixXd centered = cloud.positions.colwise() - est.mean;
    est.cov = centered * w.asDiagonal() * centered.transpose();
    est.log_mass = cloud.log_mass + nw.log_mean;
    est.ess = 1.0 / w.squaredNorm();
    return est;
}

ParticleRun run_particle(const Scenario& s, const Eigen::MatrixXd& y, const ParticleOptions& options, RngStream rng) {
    s.require_valid("run_particle");
    const auto& grid = s.time();
    if (y.rows() != static_cast<Eigen::Index>(s.n()) || y.cols() != static_cast<Eigen::Index>(grid.nodes()))
        throw GridError("observation path does not match the scenario time grid");
    ParticleRun run;
    ParticleCloud cloud = pf_init(s, options.particles, rng.substream(0));
    RngStream step_rng = rng.substream(1);
    RngStream resample_rng = rng.substream(2);
    run.t.push_back(0.0);
    run.estimates.push_back(pf_estimate(cloud));
    if (options.on_step) options.on_step(0, cloud);
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        cloud = pf_step(cloud, s, grid.time(k), y.col(kk + 1) - y.col(kk), step_rng, options.jobs);
        run.t.push_back(grid.time(k + 1));
        run.estimates.push_back(pf_estimate(cloud));
        if (options.on_step) options.on_step(k + 1, cloud);
        if (run.estimates.back().ess / static_cast<double>(options.particles) < options.resample_threshold) {
            cloud = pf_resample(cloud, options.resample_threshold, resample_rng);
            ++run.resamples;
        }
    }
    return run;
}

Eigen::MatrixXd ParticleRun::means() const {
    Eigen::MatrixXd out(estimates.front().mean.size(), static_cast<Eigen::Index>(estimates.size()));
    for (std::size_t k = 0; k < estimates.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = estimates[k].mean;
    return out;
}

FilterTrack ParticleRun::track() const {
    FilterTrack tr;
    tr.method = "particle";
    tr.t = t;
    tr.mean = means();
    tr.log_mass.resize(static_cast<Eigen::Index>(estimates.size()));
    Eigen::VectorXd ess(static_cast<Eigen::Index>(estimates.size()));
    for (std::size_t k = 0; k < estimates.size(); ++k) {
        tr.cov.push_back(estimates[k].cov);
        tr.log_mass[static_cast<Eigen::Index>(k)] = estimates[k].log_mass;
        ess[static_cast<Eigen::Index>(k)] = estimates[k].ess;
    }
    tr.extras.emplace_back("ess", ess);
    return tr;
}

}  // namespace bvfilter
