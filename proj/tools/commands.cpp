#include "commands.hpp"

#include "fixtures.hpp"

#include "bvfilter/error.hpp"
#include "bvfilter/io.hpp"
#include "bvfilter/kalman.hpp"
#include "bvfilter/mollify.hpp"
#include "bvfilter/parallel.hpp"
#include "bvfilter/particle.hpp"
#include "bvfilter/simulate.hpp"
#include "bvfilter/zakai.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>

namespace bvfilter::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::input;
    } catch (const GridError& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::grid_mismatch;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::failure;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::input;
    }
}

std::string numbered(const char* prefix, std::size_t k, const char* suffix) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%06zu%s", prefix, k, suffix);
    return buf;
}

// Loads the scenario; prints violations and returns nullopt if it does not validate.
std::optional<Scenario> load_valid(const fs::path& path, std::ostream& err) {
    if (!fs::exists(path)) throw IoError("scenario file not found: " + path.string());
    Scenario s = load_scenario(path);
    if (!s.validation().passes()) {
        err << "scenario failed validation:\n" << s.validation().summary() << "\n";
        return std::nullopt;
    }
    return s;
}

Eigen::MatrixXd observations_for(const Scenario& s, const FilterArgs& args, std::uint64_t seed) {
    if (args.obs) {
        if (!fs::exists(*args.obs)) throw IoError("observation file not found: " + args.obs->string());
        const ObservationFile f = read_observation_csv(*args.obs);
        const auto& grid = s.time();
        if (f.y.rows() != static_cast<Eigen::Index>(s.n()) || f.t.size() != grid.nodes())
            throw GridError("observation file does not match the scenario time grid");
        for (std::size_t k = 0; k < f.t.size(); ++k)
            if (std::abs(f.t[k] - grid.time(k)) > 1e-9 * std::max(1.0, grid.horizon()))
                throw GridError("observation times differ from the scenario time grid");
        return f.y;
    }
    if (!args.generate) throw IoError("filter needs --obs FILE or --generate");
    const PathBundle b = simulate_bundle(s, Measure::Physical, RngStream(seed, 0));
    write_path_csv(args.out / "observations.csv", b);
    return b.y;
}

json check(const std::string& name, double value, double threshold, bool pass) {
    return {{"name", name}, {"value", value}, {"threshold", threshold}, {"pass", pass}};
}

json suite_eta(unsigned jobs) {
    json checks = json::array();
    const Scenario quiet(fixtures::without_observation(fixtures::ou(1000)));
    const EnsembleTerminal q = simulate_terminal(quiet, Measure::Reference, RngStream(7, 0), 200, jobs);
    const double worst = q.log_eta.cwiseAbs().maxCoeff();
    checks.push_back(check("h=0: eta_T == 1 exactly", worst, 0.0, worst == 0.0));

    const Scenario ou(fixtures::ou(1000));
    const EnsembleTerminal e = simulate_terminal(ou, Measure::Reference, RngStream(11, 0), 20000, jobs);
    const bool finite = e.log_eta.allFinite();
    checks.push_back(check("eta_T > 0 on every path", finite ? std::exp(e.log_eta.minCoeff()) : 0.0, 0.0, finite));
    const MonteCarloEstimate mc = monte_carlo_mean(e.log_eta.array().exp().matrix());
    const double z = std::abs(mc.mean - 1.0) / mc.standard_error;
    checks.push_back(check("E[eta_T] = 1 (standard errors)", z, 3.0, z <= 3.0));
    return checks;
}

json suite_mass(unsigned) {
    json checks = json::array();
    const Scenario lg(fixtures::linear_gaussian(2000, 512));
    const PathBundle b = simulate_bundle(lg, Measure::Physical, RngStream(3, 0));
    const ZakaiRun z = run_zakai(lg, b.y);
    const MassFormulaCheck mass = mass_formula_check(z, b.y, lg);
    checks.push_back(check("|log rho_T(1) - mass formula|", mass.discrepancy, 0.05, mass.discrepancy <= 0.05));

    const ZakaiRun k = run_ks(lg, b.y);
    const double gap = (k.mean - z.mean).cwiseAbs().maxCoeff();
    checks.push_back(check("KS mean == normalized Zakai mean", gap, 1e-12, gap <= 1e-12));

    const Scenario quiet(fixtures::without_observation(fixtures::linear_gaussian(2000, 512)));
    const ZakaiRun q = run_zakai(quiet, b.y);
    const double drift = q.log_mass.cwiseAbs().maxCoeff();
    checks.push_back(check("h=0: |log rho_t(1)|", drift, 1e-6, drift <= 1e-6));
    return checks;
}

json suite_mollify(unsigned) {
    json checks = json::array();
    for (std::size_t m : {1u, 2u})
        for (const auto& fx : default_tprop_fixtures(m))
            for (const auto& c : tprop_suite(fx).checks)
                checks.push_back({{"name", std::to_string(m) + "d " + c.identity},
                                  {"lhs", c.lhs},
                                  {"rhs", c.rhs},
                                  {"abs_error", c.abs_error},
                                  {"pass", c.pass}});

    const SpatialGrid grid = SpatialGrid::uniform_1d(-8.0, 8.0, 801);
    Eigen::VectorXd bump = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double r = grid.coordinate(0, j) / 1.5;
        if (std::abs(r) < 1.0) bump[static_cast<Eigen::Index>(j)] = std::exp(-1.0 / (1.0 - r * r));
    }
    const double semi = semigroup_error(grid, bump, 0.2, 0.3);
    checks.push_back(check("T_e T_d f = T_(e+d) f", semi, 2e-6, semi <= 2e-6));

    const DiscreteMeasure mu{Eigen::RowVector3d(-1.0, 0.5, 2.0), Eigen::Vector3d(1.0, -0.5, 0.7)};
    const std::vector<double> ladder = smoothing_ladder(mu, grid, {0.05, 0.1, 0.2, 0.4, 0.8, 1.6});
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < ladder.size(); ++i) worst = std::max(worst, ladder[i] - ladder[i - 1]);
    checks.push_back(check("|T_e|mu|| non-increasing in e", worst, 0.0, worst <= 0.0));
    return checks;
}

json suite_convergence(unsigned jobs) {
    json checks = json::array();
    std::vector<std::uint64_t> seeds(256);
    std::iota(seeds.begin(), seeds.end(), std::uint64_t{1});
    const fixtures::ConvergenceStudy t = fixtures::time_convergence(fixtures::nonlinear(256, 129), 256, seeds, jobs);
    checks.push_back(check("time order of the terminal mean", t.order, 0.7, t.order >= 0.7 && t.order <= 1.3));
    seeds.resize(8);
    const fixtures::ConvergenceStudy x = fixtures::space_convergence(fixtures::nonlinear(4000, 129), 129, seeds, jobs);
    checks.push_back(check("space order of the terminal mean", x.order, 1.7, x.order >= 1.7));
    return checks;
}

}  // namespace

fs::path default_output_dir() {
    if (const char* env = std::getenv("BVFILTER_OUT"); env && *env) return env;
    return "bvfilter-out";
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto s = load_valid(args.scenario, err);
        if (!s) return exit_code::failure;
        if (args.paths == 0) throw Error("--paths must be positive");
        if (args.measure != "physical" && args.measure != "reference") throw Error("--measure must be physical or reference");
        const Measure measure = args.measure == "physical" ? Measure::Physical : Measure::Reference;
        const std::uint64_t seed = args.seed.value_or(s->seed());
        const RngStream rng(seed, 0);
        const auto m = static_cast<Eigen::Index>(s->m());
        Eigen::MatrixXd terminal(m, static_cast<Eigen::Index>(args.paths));
        Eigen::VectorXd eta(static_cast<Eigen::Index>(args.paths));
        const int width = args.paths > 99999 ? 9 : 5;
        parallel_for(args.paths, args.jobs, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const PathBundle b = simulate_bundle(*s, measure, rng.substream(i));
                char name[32];
                std::snprintf(name, sizeof name, "path_%0*zu.csv", width, i);
                write_path_csv(args.out / name, b);
                terminal.col(static_cast<Eigen::Index>(i)) = b.x.col(b.x.cols() - 1);
                eta[static_cast<Eigen::Index>(i)] = std::exp(b.log_eta[b.log_eta.size() - 1]);
            }
        });
        json summary{{"schema", "v1"}, {"paths", args.paths}, {"seed", seed}, {"measure", args.measure}};
        json x_mean = json::array(), x_se = json::array();
        for (Eigen::Index i = 0; i < m; ++i) {
            const MonteCarloEstimate e = monte_carlo_mean(terminal.row(i).transpose());
            x_mean.push_back(e.mean);
            x_se.push_back(args.paths > 1 ? e.standard_error : 0.0);
        }
        const MonteCarloEstimate eta_mc = monte_carlo_mean(eta);
        summary["terminal"] = {{"x_mean", x_mean}, {"x_mean_se", x_se}, {"eta_mean", eta_mc.mean},
                               {"eta_mean_se", args.paths > 1 ? eta_mc.standard_error : 0.0}};
        write_json(args.out / "summary.json", summary);
        out << "wrote " << args.paths << " path(s) to " << args.out.string() << "\n";
        return exit_code::ok;
    });
}

int cmd_filter(const FilterArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto s = load_valid(args.scenario, err);
        if (!s) return exit_code::failure;
        const std::uint64_t seed = args.seed.value_or(s->seed());
        const Eigen::MatrixXd y = observations_for(*s, args, seed);
        FilterTrack track;
        if (args.method == "zakai" || args.method == "ks") {
            ZakaiOptions opts;
            opts.snapshot_stride = args.snapshots;
            const ZakaiRun run = args.method == "zakai" ? run_zakai(*s, y, opts) : run_ks(*s, y, opts);
            for (const DensityField& p : run.snapshots) {
                const std::size_t node = s->time().nearest_node(p.time);
                write_density_snapshot(args.out / "snapshots" / numbered((args.method + "_").c_str(), node, ".bin"), p);
            }
            track = run.track(args.method);
        } else if (args.method == "particle") {
            ParticleOptions opts;
            opts.particles = args.particles;
            opts.resample_threshold = args.threshold;
            opts.jobs = args.jobs;
            if (args.dump_every > 0)
                opts.on_step = [&](std::size_t node, const ParticleCloud& c) {
                    if (node % args.dump_every != 0) return;
                    std::string text(kSchemaLine);
                    text += "\n";
                    for (Eigen::Index i = 0; i < c.positions.rows(); ++i) text += "x_" + std::to_string(i + 1) + ",";
                    text += "log_weight\n";
                    for (Eigen::Index j = 0; j < c.positions.cols(); ++j) {
                        for (Eigen::Index i = 0; i < c.positions.rows(); ++i) text += std::to_string(c.positions(i, j)) + ",";
                        text += std::to_string(c.log_weights[j]) + "\n";
                    }
                    write_atomic(args.out / "particles" / numbered("node_", node, ".csv"), text);
                };
            track = run_particle(*s, y, opts, RngStream(seed, 1)).track();
        } else if (args.method == "kalman") {
            track = kalman_run(*s, y, KalmanOptions{args.substeps}).track();
        } else {
            throw Error("unknown method '" + args.method + "'");
        }
        const fs::path file = args.out / (args.method + ".csv");
        write_track_csv(file, track);
        out << "wrote " << file.string() << "\n";
        return exit_code::ok;
    });
}

int cmd_compare(const CompareArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        for (const auto& p : {args.a, args.b})
            if (!fs::exists(p)) throw IoError("run file not found: " + p.string());
        const FilterTrack a = read_track_csv(args.a);
        const FilterTrack b = read_track_csv(args.b);
        if (a.nodes() != b.nodes() || a.dim() != b.dim()) throw GridError("runs have different time grids or dimensions");
        for (std::size_t k = 0; k < a.nodes(); ++k)
            if (std::abs(a.t[k] - b.t[k]) > 1e-12 * std::max(1.0, std::abs(a.t[k])))
                throw GridError("runs have different time grids");
        const double rmse = std::sqrt((a.mean - b.mean).squaredNorm() / static_cast<double>(a.mean.size()));
        double cov = 0.0;
        for (std::size_t k = 0; k < a.nodes(); ++k) cov = std::max(cov, (a.cov[k] - b.cov[k]).cwiseAbs().maxCoeff());
        const double mass = (a.log_mass - b.log_mass).cwiseAbs().maxCoeff();
        bool pass = true;
        json thresholds = json::object();
        auto gate = [&](const char* name, double value, const std::optional<double>& limit) {
            if (!limit) return;
            thresholds[name] = *limit;
            pass = pass && value <= *limit;
        };
        gate("rmse_mean", rmse, args.max_rmse);
        gate("sup_cov_error", cov, args.max_cov);
        gate("mass_log_discrepancy", mass, args.max_mass);
        const json report{{"a", args.a.string()},         {"b", args.b.string()},
                          {"rmse_mean", rmse},            {"sup_cov_error", cov},
                          {"mass_log_discrepancy", mass}, {"thresholds", thresholds},
                          {"pass", pass}};
        if (args.out) write_json(*args.out, report);
        out << report.dump(2) << "\n";
        return pass ? exit_code::ok : exit_code::failure;
    });
}

json run_suite(const std::string& suite, unsigned jobs) {
    json checks;
    if (suite == "eta") checks = suite_eta(jobs);
    else if (suite == "mass") checks = suite_mass(jobs);
    else if (suite == "mollify") checks = suite_mollify(jobs);
    else if (suite == "convergence") checks = suite_convergence(jobs);
    else throw Error("unknown suite '" + suite + "'");
    bool pass = true;
    for (const auto& c : checks) pass = pass && c.at("pass").get<bool>();
    return {{"suite", suite}, {"pass", pass}, {"checks", checks}};
}

int cmd_checks(const ChecksArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const json report = run_suite(args.suite, args.jobs);
        if (args.out) write_json(*args.out, report);
        out << report.dump(2) << "\n";
        if (!report.at("pass").get<bool>()) {
            for (const auto& c : report.at("checks"))
                if (!c.at("pass").get<bool>()) err << "FAILED: " << c.at("name").get<std::string>() << "\n";
            return exit_code::failure;
        }
        return exit_code::ok;
    });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Nonlinear filtering with a bounded-variation signal input"};
    app.require_subcommand(1);
    const fs::path out_dir = default_output_dir();

    SimulateArgs sim;
    sim.out = out_dir;
    auto* s = app.add_subcommand("simulate", "Simulate signal/observation paths");
    s->add_option("scenario", sim.scenario, "Scenario JSON")->required();
    s->add_option("--paths", sim.paths, "Number of paths");
    s->add_option("--seed", sim.seed, "Seed (default: scenario seed)");
    s->add_option("--out", sim.out, "Output directory");
    s->add_option("--measure", sim.measure, "physical or reference")->check(CLI::IsMember({"physical", "reference"}));
    s->add_option("--jobs", sim.jobs, "Worker threads");

    FilterArgs fil;
    fil.out = out_dir;
    auto* f = app.add_subcommand("filter", "Run a filter on an observation path");
    f->add_option("scenario", fil.scenario, "Scenario JSON")->required();
    f->add_option("--method", fil.method, "zakai, ks, particle or kalman")
        ->check(CLI::IsMember({"zakai", "ks", "particle", "kalman"}));
    auto* obs = f->add_option("--obs", fil.obs, "Observation CSV (Y_1.. columns)");
    f->add_flag("--generate", fil.generate, "Simulate the observation path from the scenario")->excludes(obs);
    f->add_option("--particles", fil.particles, "Particle count");
    f->add_option("--seed", fil.seed, "Seed (default: scenario seed)");
    f->add_option("--threshold", fil.threshold, "Resampling threshold on ESS/N");
    f->add_option("--snapshots", fil.snapshots, "Write a density snapshot every K nodes");
    f->add_option("--dump-particles", fil.dump_every, "Write the particle cloud every K nodes");
    f->add_option("--substeps", fil.substeps, "Kalman Euler sub-steps per cell");
    f->add_option("--jobs", fil.jobs, "Worker threads (particle)");
    f->add_option("--out", fil.out, "Output directory");

    CompareArgs cmp;
    auto* c = app.add_subcommand("compare", "Compare two filter CSVs");
    c->add_option("a", cmp.a, "First run")->required();
    c->add_option("b", cmp.b, "Second run")->required();
    c->add_option("--max-rmse", cmp.max_rmse, "Threshold on RMSE of means");
    c->add_option("--max-cov", cmp.max_cov, "Threshold on sup covariance error");
    c->add_option("--max-mass", cmp.max_mass, "Threshold on sup |log mass difference|");
    c->add_option("--out", cmp.out, "Write metrics JSON here");

    ChecksArgs chk;
    auto* k = app.add_subcommand("checks", "Run a built-in invariant suite");
    k->add_option("--suite", chk.suite, "eta, mass, mollify or convergence")
        ->required()
        ->check(CLI::IsMember({"eta", "mass", "mollify", "convergence"}));
    k->add_option("--out", chk.out, "Write the report JSON here");
    k->add_option("--jobs", chk.jobs, "Worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }
    if (s->parsed()) return cmd_simulate(sim, out, err);
    if (f->parsed()) return cmd_filter(fil, out, err);
    if (c->parsed()) return cmd_compare(cmp, out, err);
    return cmd_checks(chk, out, err);
}

}  // namespace bvfilter::cli
