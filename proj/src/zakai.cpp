#include "bvfilter/zakai.hpp"

#include "bvfilter/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bvfilter {

namespace {

/// Calls fn(offset, stride, count) for every grid line parallel to `axis`.
template <typename Fn>
void for_each_line(const SpatialGrid& g, std::size_t axis, Fn&& fn) {
    const std::size_t count = g.count(axis);
    const std::size_t stride = g.stride(axis);
    const std::size_t lines = g.size() / count;
    for (std::size_t l = 0; l < lines; ++l) {
        const std::size_t offset = g.dims() == 1 ? 0 : (axis == 0 ? l : l * count);
        fn(offset, stride, count);
    }
}

Eigen::Index diag_index(std::size_t m, std::size_t axis) { return (m == 2 && axis == 1) ? 2 : 0; }

/// First derivative along an axis: central inside, second-order one-sided at the ends.
Eigen::VectorXd first_derivative(const SpatialGrid& g, std::size_t axis, const Eigen::Ref<const Eigen::VectorXd>& f) {
    Eigen::VectorXd out(f.size());
    const double h = g.spacing(axis);
    for_each_line(g, axis, [&](std::size_t off, std::size_t st, std::size_t n) {
        auto at = [&](std::size_t i) { return f[static_cast<Eigen::Index>(off + i * st)]; };
        auto put = [&](std::size_t i, double v) { out[static_cast<Eigen::Index>(off + i * st)] = v; };
        put(0, (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h));
        for (std::size_t i = 1; i + 1 < n; ++i) put(i, (at(i + 1) - at(i - 1)) / (2.0 * h));
        put(n - 1, (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h));
    });
    return out;
}

Eigen::VectorXd second_derivative(const SpatialGrid& g, std::size_t axis, const Eigen::Ref<const Eigen::VectorXd>& f) {
    Eigen::VectorXd out(f.size());
    const double h2 = g.spacing(axis) * g.spacing(axis);
    for_each_line(g, axis, [&](std::size_t off, std::size_t st, std::size_t n) {
        auto at = [&](std::size_t i) { return f[static_cast<Eigen::Index>(off + i * st)]; };
        auto put = [&](std::size_t i, double v) { out[static_cast<Eigen::Index>(off + i * st)] = v; };
        if (n >= 4) {
            put(0, (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2);
            put(n - 1, (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) / h2);
        } else {
            put(0, (at(0) - 2.0 * at(1) + at(2)) / h2);
            put(n - 1, (at(n - 1) - 2.0 * at(n - 2) + at(n - 3)) / h2);
        }
        for (std::size_t i = 1; i + 1 < n; ++i) put(i, (at(i + 1) - 2.0 * at(i) + at(i - 1)) / h2);
    });
    return out;
}

void shift_lines(const SpatialGrid& g, std::size_t axis, Eigen::VectorXd& v, double shift) {
    if (shift == 0.0) return;
    const double r = shift / g.spacing(axis);
    const double nearest = std::round(r);
    const bool aligned = std::abs(r - nearest) <= 1e-9 * std::max(1.0, std::abs(r));
    const double q_real = aligned ? nearest : std::floor(r);
    const double theta = aligned ? 0.0 : r - q_real;
    const auto q = static_cast<long long>(q_real);
    std::vector<double> line;
    for_each_line(g, axis, [&](std::size_t off, std::size_t st, std::size_t n) {
        line.resize(n);
        for (std::size_t i = 0; i < n; ++i) line[i] = v[static_cast<Eigen::Index>(off + i * st)];
        const auto nn = static_cast<long long>(n);
        auto old = [&](long long i) { return (i >= 0 && i < nn) ? line[static_cast<std::size_t>(i)] : 0.0; };
        for (long long i = 0; i < nn; ++i) {
            const double value = aligned ? old(i - q) : (1.0 - theta) * old(i - q) + theta * old(i - q - 1);
            v[static_cast<Eigen::Index>(off + static_cast<std::size_t>(i) * st)] = value;
        }
    });
}

void require_finite(const Eigen::VectorXd& v, const char* substep, double t) {
    if (!v.allFinite())
        throw NumericalError(std::string("zakai_step: non-finite density after ") + substep + " sub-step at t = " +
                             std::to_string(t));
}

void check_cfl(const GeneratorStencil& stencil, double dt) {
    const double cfl = stencil.cfl_number(dt);
    if (cfl > kMaxCfl)
        throw NumericalError("CFL violation: max |a| dt / dx^2 = " + std::to_string(cfl) + " > " +
                             std::to_string(kMaxCfl));
}

}  // namespace

GeneratorStencil::GeneratorStencil(const SpatialGrid& grid, Eigen::MatrixXd drift, Eigen::MatrixXd half_cov)
    : grid_(grid), drift_(std::move(drift)), half_cov_(std::move(half_cov)) {
    const auto m = static_cast<Eigen::Index>(grid_.dims());
    const auto nodes = static_cast<Eigen::Index>(grid_.size());
    if (drift_.rows() != m || drift_.cols() != nodes || half_cov_.cols() != nodes ||
        half_cov_.rows() != static_cast<Eigen::Index>(packed_size(grid_.dims())))
        throw GridError("generator stencil: coefficient arrays do not match the grid");
}

GeneratorStencil::GeneratorStencil(const Scenario& s, double t)
    : GeneratorStencil(s.space(), s.drift().evaluate(t, s.space().points()),
                       s.diffusion().half_covariance(t, s.space().points())) {}

Eigen::VectorXd GeneratorStencil::apply_adjoint(const Eigen::Ref<const Eigen::VectorXd>& p) const {
    const std::size_t m = grid_.dims();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(p.size());
    for (std::size_t axis = 0; axis < m; ++axis) {
        const double h = grid_.spacing(axis);
        const Eigen::VectorXd q = drift_.row(static_cast<Eigen::Index>(axis)).transpose().cwiseProduct(p);
        const Eigen::VectorXd r = half_cov_.row(diag_index(m, axis)).transpose().cwiseProduct(p);
        for_each_line(grid_, axis, [&](std::size_t off, std::size_t st, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) {
                const auto j = static_cast<Eigen::Index>(off + i * st);
                const auto jm = static_cast<Eigen::Index>(off + (i - 1) * st);
                const auto jp = static_cast<Eigen::Index>(off + (i + 1) * st);
                const double qm = i > 0 ? q[jm] : 0.0, qp = i + 1 < n ? q[jp] : 0.0;
                const double rm = i > 0 ? r[jm] : 0.0, rp = i + 1 < n ? r[jp] : 0.0;
                out[j] += -(qp - qm) / (2.0 * h) + (rp - 2.0 * r[j] + rm) / (h * h);
            }
        });
    }
    if (m == 2) {
        const Eigen::VectorXd s = half_cov_.row(1).transpose().cwiseProduct(p);
        const std::size_t n0 = grid_.count(0), n1 = grid_.count(1);
        const double scale = 2.0 / (4.0 * grid_.spacing(0) * grid_.spacing(1));
        auto at = [&](long long i0, long long i1) {
            if (i0 < 0 || i1 < 0 || i0 >= static_cast<long long>(n0) || i1 >= static_cast<long long>(n1)) return 0.0;
            return s[static_cast<Eigen::Index>(grid_.flatten(static_cast<std::size_t>(i0), static_cast<std::size_t>(i1)))];
        };
        for (std::size_t i0 = 0; i0 < n0; ++i0)
            for (std::size_t i1 = 0; i1 < n1; ++i1) {
                const auto a = static_cast<long long>(i0), b = static_cast<long long>(i1);
                out[static_cast<Eigen::Index>(grid_.flatten(i0, i1))] +=
                    scale * (at(a + 1, b + 1) - at(a + 1, b - 1) - at(a - 1, b + 1) + at(a - 1, b - 1));
            }
    }
    return out;
}

Eigen::VectorXd GeneratorStencil::apply_generator(const Eigen::Ref<const Eigen::VectorXd>& phi) const {
    const std::size_t m = grid_.dims();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(phi.size());
    for (std::size_t axis = 0; axis < m; ++axis) {
        out += drift_.row(static_cast<Eigen::Index>(axis)).transpose().cwiseProduct(first_derivative(grid_, axis, phi));
        out += half_cov_.row(diag_index(m, axis)).transpose().cwiseProduct(second_derivative(grid_, axis, phi));
    }
    if (m == 2) {
        const Eigen::VectorXd cross = first_derivative(grid_, 0, first_derivative(grid_, 1, phi));
        out += 2.0 * half_cov_.row(1).transpose().cwiseProduct(cross);
    }
    return out;
}

double GeneratorStencil::cfl_number(double dt) const {
    const std::size_t m = grid_.dims();
    Eigen::VectorXd local = Eigen::VectorXd::Zero(half_cov_.cols());
    for (std::size_t axis = 0; axis < m; ++axis)
        local += half_cov_.row(diag_index(m, axis)).transpose().cwiseAbs() / (grid_.spacing(axis) * grid_.spacing(axis));
    if (m == 2) local += half_cov_.row(1).transpose().cwiseAbs() / (grid_.spacing(0) * grid_.spacing(1));
    return dt * local.maxCoeff();
}

Eigen::MatrixXd GeneratorStencil::adjoint_matrix() const {
    const auto nodes = static_cast<Eigen::Index>(grid_.size());
    Eigen::MatrixXd mat(nodes, nodes);
    for (Eigen::Index j = 0; j < nodes; ++j) mat.col(j) = apply_adjoint(Eigen::VectorXd::Unit(nodes, j));
    return mat;
}

Eigen::VectorXd generator_apply(const Scenario& s, double t, const Eigen::Ref<const Eigen::VectorXd>& phi) {
    if (static_cast<std::size_t>(phi.size()) != s.space().size())
        throw GridError("generator_apply: grid function does not match the spatial grid");
    return GeneratorStencil(s, t).apply_generator(phi);
}

DensityMoments density_moments(const DensityField& p) {
    const Eigen::VectorXd wp = p.grid.trapezoid_weights().cwiseProduct(p.values);
    const double raw = wp.sum();
    const Eigen::MatrixXd pts = p.grid.points();
    DensityMoments mom;
    mom.log_mass = p.log_scale + std::log(raw);
    mom.mean = pts * wp / raw;
    const Eigen::MatrixXd centered = pts.colwise() - mom.mean;
    mom.cov = centered * wp.asDiagonal() * centered.transpose() / raw;
    return mom;
}

void fokker_planck_substep(const GeneratorStencil& stencil, DensityField& p, double dt) {
    p.values += dt * stencil.apply_adjoint(p.values);
    p.values = p.values.cwiseMax(0.0);
    require_finite(p.values, "Fokker-Planck", p.time);
}

void translate_density(DensityField& p, const Eigen::Ref<const Eigen::VectorXd>& shift) {
    if (static_cast<std::size_t>(shift.size()) != p.grid.dims()) throw GridError("translation has wrong dimension");
    if (!shift.allFinite()) throw NumericalError("translation by a non-finite amount");
    for (std::size_t axis = 0; axis < p.grid.dims(); ++axis)
        shift_lines(p.grid, axis, p.values, shift[static_cast<Eigen::Index>(axis)]);
}

void observation_substep(DensityField& p, const Eigen::Ref<const Eigen::MatrixXd>& g,
                         const Eigen::Ref<const Eigen::VectorXd>& dbbar, double dt) {
    Eigen::ArrayXd log_factor = (g.transpose() * dbbar).array() - 0.5 * dt * g.colwise().squaredNorm().transpose().array();
    const double top = log_factor.maxCoeff();
    if (top > 600.0) {
        log_factor -= top;
        p.log_scale += top;
    }
    p.values.array() *= log_factor.exp();
    require_finite(p.values, "observation", p.time);
}

DensityField zakai_step(const Scenario& s, const DensityField& p, double t_k, const Eigen::Ref<const Eigen::VectorXd>& dy,
                        const Eigen::Ref<const Eigen::VectorXd>& dnu_c) {
    s.require_valid("zakai_step");
    const double dt = s.time().dt();
    const GeneratorStencil stencil(s, t_k);
    check_cfl(stencil, dt);
    DensityField out = p;
    out.time = t_k;
    fokker_planck_substep(stencil, out, dt);
    translate_density(out, dnu_c);
    require_finite(out.values, "transport", t_k);
    const Eigen::MatrixXd ginv = s.gamma_inverse(t_k);
    observation_substep(out, ginv * s.observation().evaluate(t_k, s.space().points()), ginv * dy, dt);
    out.time = t_k + dt;
    return out;
}

DensityField jump_reset(const DensityField& p, const Eigen::Ref<const Eigen::VectorXd>& jump) {
    DensityField out = p;
    translate_density(out, jump);
    return out;
}

ZakaiSolver::ZakaiSolver(const Scenario& s) : scenario_(s) {
    scenario_.require_valid("zakai solver");
    if (!scenario_.has_space()) throw ScenarioError("zakai solver: scenario has no spatial grid");
    if (!scenario_.validation().xi_square_integrable)
        throw ScenarioError("zakai solver: initial law has no square-integrable density");
    points_ = scenario_.space().points();
    weights_ = scenario_.space().trapezoid_weights();
    GeneratorStencil first(scenario_, 0.0);
    check_cfl(first, scenario_.time().dt());
    if (scenario_.time_homogeneous()) {
        stencil_ = std::move(first);
        scaled_h_ = scenario_.gamma_inverse(0.0) * scenario_.observation().evaluate(0.0, points_);
    }
}

const GeneratorStencil& ZakaiSolver::stencil_at(double t, std::optional<GeneratorStencil>& scratch) const {
    if (stencil_) return *stencil_;
    scratch.emplace(scenario_, t);
    check_cfl(*scratch, scenario_.time().dt());
    return *scratch;
}

Eigen::MatrixXd ZakaiSolver::scaled_observation(double t) const {
    if (scaled_h_) return *scaled_h_;
    return scenario_.gamma_inverse(t) * scenario_.observation().evaluate(t, points_);
}

DensityField ZakaiSolver::initial_density() const {
    DensityField p;
    p.grid = scenario_.space();
    p.values = scenario_.xi().density_on(p.grid);
    const double raw = weights_.dot(p.values);
    if (!(raw > 0.0)) throw NumericalError("initial density has no mass on the grid");
    p.values /= raw;
    p.time = 0.0;
    if (scenario_.nu().has_jump(0)) translate_density(p, scenario_.nu().jump_at(0));
    return p;
}

void ZakaiSolver::step(DensityField& p, std::size_t k, const Eigen::Ref<const Eigen::VectorXd>& dy) const {
    const auto& grid = scenario_.time();
    const double t = grid.time(k);
    const double dt = grid.dt();
    p.time = t;
    std::optional<GeneratorStencil> scratch;
    fokker_planck_substep(stencil_at(t, scratch), p, dt);
    const auto dnu = scenario_.nu().continuous_increments().col(static_cast<Eigen::Index>(k));
    if (dnu.cwiseAbs().maxCoeff() > 0.0) {
        translate_density(p, dnu);
        require_finite(p.values, "transport", t);
    }
    observation_substep(p, scaled_observation(t), scenario_.gamma_inverse(t) * dy, dt);
    p.time = grid.time(k + 1);
}

Eigen::VectorXd ZakaiSolver::observation_mean(const DensityField& p, double t) const {
    const Eigen::VectorXd wp = weights_.cwiseProduct(p.values);
    return scenario_.observation().evaluate(t, points_) * wp / wp.sum();
}

DensityMoments ZakaiSolver::moments(const DensityField& p) const {
    const Eigen::VectorXd wp = weights_.cwiseProduct(p.values);
    const double raw = wp.sum();
    DensityMoments mom;
    mom.log_mass = p.log_scale + std::log(raw);
    mom.mean = points_ * wp / raw;
    const Eigen::MatrixXd centered = points_.colwise() - mom.mean;
    mom.cov = centered * wp.asDiagonal() * centered.transpose() / raw;
    return mom;
}

namespace {

enum class Normalization { Deferred, Immediate };

ZakaiRun run_splitting(const Scenario& s, const Eigen::MatrixXd& y, const ZakaiOptions& options, Normalization mode) {
    const ZakaiSolver solver(s);
    const auto& grid = s.time();
    const auto nodes = static_cast<Eigen::Index>(grid.nodes());
    if (y.rows() != static_cast<Eigen::Index>(s.n()) || y.cols() != nodes)
        throw GridError("observation path does not match the scenario time grid");
    const auto m = static_cast<Eigen::Index>(s.m());
    const SpatialGrid& space = s.space();
    const Eigen::VectorXd weights = space.trapezoid_weights();

    ZakaiRun run;
    run.log_mass.resize(nodes);
    run.mean.resize(m, nodes);
    run.pi_h.resize(static_cast<Eigen::Index>(s.n()), nodes);
    double log_normalizer = 0.0;

    auto normalize = [&](DensityField& p) {
        const double raw = weights.dot(p.values);
        if (mode == Normalization::Immediate) {
            if (!(raw >= 1e-300) || !std::isfinite(raw)) throw NumericalError("filter collapse: mass underflow");
            p.values /= raw;
            log_normalizer += std::log(raw);
            return;
        }
        if (!(raw > 0.0) || !std::isfinite(raw)) throw NumericalError("filter collapse: density vanished");
        if (raw < 1e-100 || raw > 1e100) {
            p.values /= raw;
            p.log_scale += std::log(raw);
        }
    };
    auto record = [&](const DensityField& p, std::size_t k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const DensityMoments mom = solver.moments(p);
        run.t.push_back(grid.time(k));
        run.log_mass[kk] = mode == Normalization::Immediate ? log_normalizer + p.log_scale + std::log(weights.dot(p.values))
                                                            : mom.log_mass;
        run.mean.col(kk) = mom.mean;
        run.cov.push_back(mom.cov);
        run.pi_h.col(kk) = solver.observation_mean(p, grid.time(k));
        if (options.snapshot_stride > 0 && k % options.snapshot_stride == 0) run.snapshots.push_back(p);
    };

    DensityField p = solver.initial_density();
    if (mode == Normalization::Immediate) normalize(p);
    record(p, 0);
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        solver.step(p, k, y.col(kk + 1) - y.col(kk));
        normalize(p);
        if (s.nu().has_jump(k + 1)) {
            translate_density(p, s.nu().jump_at(k + 1));
            normalize(p);
        }
        record(p, k + 1);
    }
    run.final_density = std::move(p);
    return run;
}

}  // namespace

ZakaiRun run_zakai(const Scenario& s, const Eigen::MatrixXd& y, const ZakaiOptions& options) {
    return run_splitting(s, y, options, Normalization::Deferred);
}

ZakaiRun run_ks(const Scenario& s, const Eigen::MatrixXd& y, const ZakaiOptions& options) {
    return run_splitting(s, y, options, Normalization::Immediate);
}

FilterTrack ZakaiRun::track(const std::string& method) const {
    FilterTrack tr;
    tr.method = method;
    tr.t = t;
    tr.mean = mean;
    tr.cov = cov;
    tr.log_mass = log_mass;
    for (Eigen::Index i = 0; i < pi_h.rows(); ++i)
        tr.extras.emplace_back("pi_h_" + std::to_string(i + 1), pi_h.row(i).transpose());
    return tr;
}

double mass_formula_log(const Eigen::MatrixXd& pi_h, const Eigen::MatrixXd& y, const Scenario& s) {
    const auto& grid = s.time();
    const auto steps = static_cast<Eigen::Index>(grid.steps());
    if (pi_h.cols() != steps + 1 || y.cols() != steps + 1 || pi_h.rows() != y.rows())
        throw GridError("mass_formula_check: paths are not on the scenario time grid");
    const double dt = grid.dt();
    double log_mass = 0.0;
    for (Eigen::Index k = 0; k < steps; ++k) {
        const Eigen::MatrixXd ginv = s.gamma_inverse(grid.time(static_cast<std::size_t>(k)));
        const Eigen::VectorXd g = ginv * pi_h.col(k);
        log_mass += g.dot(ginv * (y.col(k + 1) - y.col(k))) - 0.5 * g.squaredNorm() * dt;
    }
    return log_mass;
}

MassFormulaCheck mass_formula_check(const Eigen::MatrixXd& pi_h, const Eigen::MatrixXd& y, const Scenario& s,
                                    double solver_log_mass) {
    MassFormulaCheck c;
    c.solver_log_mass = solver_log_mass;
    c.formula_log_mass = mass_formula_log(pi_h, y, s);
    c.discrepancy = std::abs(c.solver_log_mass - c.formula_log_mass);
    return c;
}

MassFormulaCheck mass_formula_check(const ZakaiRun& run, const Eigen::MatrixXd& y, const Scenario& s) {
    return mass_formula_check(run.pi_h, y, s, run.log_mass[run.log_mass.size() - 1]);
}

Eigen::MatrixXd innovation_increments(const Eigen::MatrixXd& pi_h, const Eigen::MatrixXd& y, const Scenario& s) {
    const auto& grid = s.time();
    const auto steps = static_cast<Eigen::Index>(grid.steps());
    if (pi_h.cols() != steps + 1 || y.cols() != steps + 1) throw GridError("innovation: paths are not on the time grid");
    Eigen::MatrixXd out(y.rows(), steps);
    for (Eigen::Index k = 0; k < steps; ++k) {
        const Eigen::MatrixXd ginv = s.gamma_inverse(grid.time(static_cast<std::size_t>(k)));
        out.col(k) = ginv * (y.col(k + 1) - y.col(k)) - ginv * pi_h.col(k) * grid.dt();
    }
    return out;
}

}  // namespace bvfilter
