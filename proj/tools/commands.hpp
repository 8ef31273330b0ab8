#pragma once

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace bvfilter::cli {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;  // validation, failed check, unsuitable method
inline constexpr int input = 2;    // missing or malformed input file
inline constexpr int grid_mismatch = 3;
}  // namespace exit_code

/// $BVFILTER_OUT, else "bvfilter-out".
std::filesystem::path default_output_dir();

struct SimulateArgs {
    std::filesystem::path scenario;
    std::size_t paths = 1;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out;
    std::string measure = "physical";
    unsigned jobs = 1;
};

struct FilterArgs {
    std::filesystem::path scenario;
    std::string method = "zakai";
    std::optional<std::filesystem::path> obs;
    bool generate = false;
    std::size_t particles = 1000;
    std::optional<std::uint64_t> seed;
    double threshold = 0.5;
    std::size_t snapshots = 0;  // snapshot stride, 0 = none
    std::size_t dump_every = 0; // particle dump stride, 0 = none
    std::size_t substeps = 1;   // kalman
    unsigned jobs = 1;
    std::filesystem::path out;
};

struct CompareArgs {
    std::filesystem::path a;
    std::filesystem::path b;
    std::optional<double> max_rmse;
    std::optional<double> max_cov;
    std::optional<double> max_mass;
    std::optional<std::filesystem::path> out;
};

struct ChecksArgs {
    std::string suite;
    std::optional<std::filesystem::path> out;
    unsigned jobs = 1;
};

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);
int cmd_filter(const FilterArgs& args, std::ostream& out, std::ostream& err);
int cmd_compare(const CompareArgs& args, std::ostream& out, std::ostream& err);
int cmd_checks(const ChecksArgs& args, std::ostream& out, std::ostream& err);

/// Suite report {suite, pass, checks: [{name, value, threshold, pass}]}.
nlohmann::json run_suite(const std::string& suite, unsigned jobs = 1);

/// Parses argv and dispatches; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bvfilter::cli
