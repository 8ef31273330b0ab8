#include "bvfilter/kalman.hpp"

#include "bvfilter/error.hpp"

#include <cmath>
#include <string>

namespace bvfilter {

Eigen::MatrixXd kalman_gain(const LinearGaussianModel& model, const Eigen::MatrixXd& cov) {
    const Eigen::MatrixXd r = model.gamma * model.gamma.transpose();
    return cov * model.H.transpose() * r.inverse();
}

KalmanRun kalman_run(const Scenario& s, const Eigen::MatrixXd& y, const KalmanOptions& options) {
    s.require_valid("kalman_run");
    if (!s.linear()) throw ScenarioError("oracle requires linear-Gaussian scenario");
    if (options.substeps == 0) throw GridError("kalman_run: substeps must be positive");
    const LinearGaussianModel& lg = *s.linear();
    const auto& grid = s.time();
    if (y.rows() != static_cast<Eigen::Index>(s.n()) || y.cols() != static_cast<Eigen::Index>(grid.nodes()))
        throw GridError("observation path does not match the scenario time grid");

    const Eigen::MatrixXd r_inv = (lg.gamma * lg.gamma.transpose()).inverse();
    const Eigen::MatrixXd g_inv = lg.gamma.inverse();
    const Eigen::MatrixXd q = lg.sigma * lg.sigma.transpose();
    const double sub = static_cast<double>(options.substeps);
    const double dt = grid.dt() / sub;

    KalmanRun run;
    GaussianBelief b{lg.mean0 + s.nu().jump_at(0), lg.cov0, 0.0};
    if (s.nu().has_jump(0)) run.pre_jump.emplace_back(0, GaussianBelief{lg.mean0, lg.cov0, 0.0});
    run.t.push_back(0.0);
    run.beliefs.push_back(b);

    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const Eigen::VectorXd dy = (y.col(kk + 1) - y.col(kk)) / sub;
        const Eigen::VectorXd dnu = s.nu().continuous_increments().col(kk) / sub;
        for (std::size_t j = 0; j < options.substeps; ++j) {
            const Eigen::VectorXd predicted = lg.H * b.mean + lg.g;
            const Eigen::VectorXd scaled = g_inv * predicted;
            b.log_mass += scaled.dot(g_inv * dy) - 0.5 * scaled.squaredNorm() * dt;
            const Eigen::MatrixXd gain = b.cov * lg.H.transpose() * r_inv;
            b.mean += (lg.A * b.mean + lg.c) * dt + dnu + gain * (dy - predicted * dt);
            Eigen::MatrixXd cov = b.cov + (lg.A * b.cov + b.cov * lg.A.transpose() + q - gain * lg.H * b.cov) * dt;
            b.cov = 0.5 * (cov + cov.transpose());
        }
        if (!b.mean.allFinite() || !b.cov.allFinite())
            throw NumericalError("kalman_run: non-finite state at time step " + std::to_string(k));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b.cov, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -1e-10)
            throw NumericalError("kalman_run: covariance lost positive semi-definiteness at step " + std::to_string(k));
        if (s.nu().has_jump(k + 1)) {
            run.pre_jump.emplace_back(k + 1, b);
            b.mean += s.nu().jump_at(k + 1);
        }
        run.t.push_back(grid.time(k + 1));
        run.beliefs.push_back(b);
    }
    return run;
}

Eigen::MatrixXd KalmanRun::means() const {
    Eigen::MatrixXd out(beliefs.front().mean.size(), static_cast<Eigen::Index>(beliefs.size()));
    for (std::size_t k = 0; k < beliefs.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = beliefs[k].mean;
    return out;
}

FilterTrack KalmanRun::track() const {
    FilterTrack tr;
    tr.method = "kalman";
    tr.t = t;
    tr.mean = means();
    tr.log_mass.resize(static_cast<Eigen::Index>(beliefs.size()));
    for (std::size_t k = 0; k < beliefs.size(); ++k) {
        tr.cov.push_back(beliefs[k].cov);
        tr.log_mass[static_cast<Eigen::Index>(k)] = beliefs[k].log_mass;
    }
    return tr;
}

JumpIdentity kalman_jump_identity_check(const Scenario& s, const Eigen::MatrixXd& y) {
    const KalmanRun run = kalman_run(s, y);
    JumpIdentity out;
    for (const auto& [k, before] : run.pre_jump) {
        const GaussianBelief& after = run.beliefs[k];
        out.max_cov_jump = std::max(out.max_cov_jump, (after.cov - before.cov).norm());
        out.max_mean_jump_error =
            std::max(out.max_mean_jump_error, ((after.mean - before.mean) - s.nu().jump_at(k)).norm());
        ++out.jumps;
    }
    return out;
}

}  // namespace bvfilter
