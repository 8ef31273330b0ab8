#pragma once

#include "bvfilter/scenario.hpp"
#include "bvfilter/types.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bvfilter {

inline constexpr std::string_view kSchemaLine = "# schema=v1";

/// Scenario from its JSON description. Throws IoError on malformed input.
ScenarioSpec parse_scenario(const nlohmann::json& doc);
ScenarioSpec parse_scenario_text(std::string_view text);
/// Throws IoError if the file is missing or unreadable.
Scenario load_scenario(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
/// Write to a temporary sibling, then rename over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// Uniform per-node CSV: t, mean_i, cov_i_j (upper triangle), log_mass, extras.
std::string track_csv(const FilterTrack& track);
void write_track_csv(const std::filesystem::path& path, const FilterTrack& track);
FilterTrack parse_track_csv(std::string_view text);
FilterTrack read_track_csv(const std::filesystem::path& path);

/// Per-path CSV: t, X_1..X_m, Y_1..Y_n, log_eta.
std::string path_csv(const PathBundle& bundle);
void write_path_csv(const std::filesystem::path& path, const PathBundle& bundle);

struct ObservationFile {
    std::vector<double> t;
    Eigen::MatrixXd y;  // n x nodes
};

/// Any schema-v1 CSV with Y_1..Y_n columns.
ObservationFile read_observation_csv(const std::filesystem::path& path);

/// Flat binary density snapshot. Header: magic "BVFD", u32 version, u32 dims,
/// per axis (f64 lower, f64 upper, u64 count), f64 time, f64 log_scale.
/// Payload: nodal values as f64, row-major; the density is exp(log_scale) * values.
void write_density_snapshot(const std::filesystem::path& path, const DensityField& p);
DensityField read_density_snapshot(const std::filesystem::path& path);

nlohmann::json to_json(const Eigen::VectorXd& v);
nlohmann::json to_json(const Eigen::MatrixXd& m);

}  // namespace bvfilter
