#include "support.hpp"

#include "bvfilter/io.hpp"
#include "commands.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <unistd.h>

using namespace bvfilter;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = 0;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "bvfilter");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Result r;
    r.code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

struct Workspace {
    fs::path root;
    Workspace() {
        root = fs::temp_directory_path() / ("bvfilter-cli-" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
        write_atomic(root / "quiet.json", R"({
  "dims": {"m": 1, "n": 1, "d": 1}, "horizon": 1.0, "steps": 400,
  "grid": {"lower": -8, "upper": 8, "counts": 161},
  "coeffs": {"b": {"type": "linear", "A": -1}, "sigma": {"type": "constant", "matrix": 1},
             "h": "zero", "gamma": {"type": "constant", "matrix": 1}},
  "xi": {"type": "gaussian", "mean": 0.5, "cov": 1},
  "nu": {"jumps": [[0.5, [0.3]]]}, "fuel_K": 1, "seed": 3
})");
        write_atomic(root / "lg.json", R"({
  "dims": {"m": 1, "n": 1, "d": 1}, "horizon": 1.0, "steps": 400,
  "grid": {"lower": -8, "upper": 8, "counts": 161},
  "coeffs": {"b": {"type": "linear", "A": -1}, "sigma": {"type": "constant", "matrix": 1},
             "h": {"type": "linear", "H": 1}, "gamma": {"type": "constant", "matrix": 1}},
  "xi": {"type": "gaussian", "mean": 0, "cov": 1},
  "nu": {"jumps": [[0.4, [0.8]]], "continuous": [[1.0, [0.3]]]}, "fuel_K": 2, "seed": 5
})");
    }
    ~Workspace() { fs::remove_all(root); }
    std::string path(const std::string& name) const { return (root / name).string(); }
};

}  // namespace

TEST_CASE("cli simulate") {
    Workspace ws;
    Result r = run({"simulate", ws.path("lg.json"), "--paths", "1", "--out", ws.path("sim1")});
    REQUIRE(r.code == 0);
    std::size_t csv = 0;
    for (const auto& e : fs::directory_iterator(ws.root / "sim1")) csv += e.path().extension() == ".csv";
    CHECK(csv == 1);
    CHECK(fs::exists(ws.root / "sim1" / "summary.json"));

    REQUIRE(run({"simulate", ws.path("lg.json"), "--paths", "3", "--seed", "9", "--out", ws.path("a")}).code == 0);
    REQUIRE(run({"simulate", ws.path("lg.json"), "--paths", "3", "--seed", "9", "--out", ws.path("b"), "--jobs", "2"}).code == 0);
    for (const char* f : {"path_00000.csv", "path_00002.csv"})
        CHECK(read_text(ws.root / "a" / f) == read_text(ws.root / "b" / f));

    r = run({"simulate", ws.path("missing.json"), "--out", ws.path("x")});
    CHECK(r.code == cli::exit_code::input);
    CHECK_FALSE(r.err.empty());
}

TEST_CASE("cli filters") {
    Workspace ws;
    Result r = run({"filter", ws.path("quiet.json"), "--method", "zakai", "--generate", "--out", ws.path("q")});
    REQUIRE(r.code == 0);
    const FilterTrack quiet = read_track_csv(ws.root / "q" / "zakai.csv");
    CHECK(quiet.log_mass.cwiseAbs().maxCoeff() <= 1e-6);

    REQUIRE(run({"filter", ws.path("lg.json"), "--generate", "--method", "zakai", "--out", ws.path("r"), "--snapshots", "100"}).code == 0);
    const std::string obs = ws.path("r/observations.csv");
    REQUIRE(fs::exists(obs));
    CHECK(fs::exists(ws.root / "r" / "snapshots" / "zakai_000100.bin"));
    REQUIRE(run({"filter", ws.path("lg.json"), "--obs", obs, "--method", "ks", "--out", ws.path("r")}).code == 0);
    REQUIRE(run({"filter", ws.path("lg.json"), "--obs", obs, "--method", "kalman", "--out", ws.path("r")}).code == 0);
    const FilterTrack z = read_track_csv(ws.root / "r" / "zakai.csv");
    const FilterTrack k = read_track_csv(ws.root / "r" / "ks.csv");
    CHECK((z.mean - k.mean).cwiseAbs().maxCoeff() <= 1e-12);

    for (const char* dir : {"p1", "p2"})
        REQUIRE(run({"filter", ws.path("lg.json"), "--obs", obs, "--method", "particle", "--particles", "200", "--seed", "4",
                     "--out", ws.path(dir), "--dump-particles", "200"})
                    .code == 0);
    CHECK(read_text(ws.root / "p1" / "particle.csv") == read_text(ws.root / "p2" / "particle.csv"));
    CHECK(fs::exists(ws.root / "p1" / "particles" / "node_000200.csv"));

    r = run({"compare", ws.path("r/zakai.csv"), ws.path("r/kalman.csv"), "--max-rmse", "0.02", "--max-cov", "0.02"});
    CHECK(r.code == 0);
    CHECK(test::contains(r.out, "rmse_mean"));

    write_atomic(ws.root / "nl.json", R"({
  "dims": {"m": 1, "n": 1, "d": 1}, "horizon": 1.0, "steps": 100,
  "coeffs": {"b": {"type": "cubic_clipped", "coef": 1, "clip": 4}, "sigma": {"type": "constant", "matrix": 1},
             "h": "tanh", "gamma": {"type": "constant", "matrix": 1}},
  "xi": {"type": "gaussian", "mean": 0, "cov": 1}, "fuel_K": 1
})");
    r = run({"filter", ws.path("nl.json"), "--generate", "--method", "kalman", "--out", ws.path("nl")});
    CHECK(r.code == cli::exit_code::failure);
    CHECK(test::contains(r.err, "oracle requires linear-Gaussian"));

    std::string coarse = read_text(ws.root / "quiet.json");
    coarse.replace(coarse.find("400"), 3, "200");
    write_atomic(ws.root / "coarse.json", coarse);
    r = run({"filter", ws.path("coarse.json"), "--obs", obs, "--method", "zakai", "--out", ws.path("mismatch")});
    CHECK(r.code == cli::exit_code::grid_mismatch);
}

TEST_CASE("cli compare") {
    Workspace ws;
    REQUIRE(run({"filter", ws.path("lg.json"), "--generate", "--method", "kalman", "--out", ws.path("c")}).code == 0);
    const fs::path a = ws.root / "c" / "kalman.csv";
    Result r = run({"compare", a.string(), a.string(), "--max-rmse", "0", "--max-cov", "0", "--max-mass", "0"});
    CHECK(r.code == 0);

    FilterTrack shifted = read_track_csv(a);
    shifted.mean.array() += 0.25;
    write_track_csv(ws.root / "shifted.csv", shifted);
    r = run({"compare", a.string(), ws.path("shifted.csv"), "--out", ws.path("cmp.json")});
    CHECK(r.code == 0);
    const auto report = nlohmann::json::parse(read_text(ws.root / "cmp.json"));
    CHECK(report.at("rmse_mean").get<double>() == doctest::Approx(0.25).epsilon(1e-12));
    r = run({"compare", a.string(), ws.path("shifted.csv"), "--max-rmse", "0.1"});
    CHECK(r.code == cli::exit_code::failure);

    FilterTrack shorter = shifted;
    shorter.t.resize(10);
    shorter.mean = shorter.mean.leftCols(10).eval();
    shorter.cov.resize(10);
    shorter.log_mass = shorter.log_mass.head(10).eval();
    shorter.extras.clear();
    write_track_csv(ws.root / "short.csv", shorter);
    CHECK(run({"compare", a.string(), ws.path("short.csv")}).code == cli::exit_code::grid_mismatch);
    CHECK(run({"compare", a.string(), ws.path("nope.csv")}).code == cli::exit_code::input);
}

TEST_CASE("cli checks and output directory") {
    Workspace ws;
    Result r = run({"checks", "--suite", "mollify", "--out", ws.path("mollify.json")});
    CHECK(r.code == 0);
    CHECK(nlohmann::json::parse(read_text(ws.root / "mollify.json")).at("pass").get<bool>());
    r = run({"checks", "--suite", "eta"});
    CHECK(r.code == 0);

    ::setenv("BVFILTER_OUT", ws.path("envout").c_str(), 1);
    CHECK(cli::default_output_dir() == ws.root / "envout");
    REQUIRE(run({"simulate", ws.path("lg.json")}).code == 0);
    CHECK(fs::exists(ws.root / "envout" / "path_00000.csv"));
    ::unsetenv("BVFILTER_OUT");
    CHECK(cli::default_output_dir() == fs::path("bvfilter-out"));
}

TEST_CASE("fixtures validate") {
    CHECK(Scenario(fixtures::ou(100)).validation().passes());
    CHECK(Scenario(fixtures::linear_gaussian(400, 129)).validation().passes());
    const Scenario nl(fixtures::nonlinear(256, 129));
    CHECK(nl.validation().passes());
    CHECK(nl.nu().has_jump(64));
    CHECK(nl.nu().has_jump(160));
    CHECK(Scenario(fixtures::without_observation(fixtures::ou(100))).observation_is_zero());
}
