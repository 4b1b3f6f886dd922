#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "boulder/environment.hpp"

namespace boulder::traj {

/// Malformed trajectory files; the message carries the file and line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One CSV row. Row 0 is the reset state (zero terms and actions).
struct Row {
  double t = 0.0;
  arm::JointVector q = arm::JointVector::Zero(), qd = arm::JointVector::Zero(), tau = arm::JointVector::Zero();
  Vec3 bucket = Vec3::Zero();
  Vec3 bucket_rpy = Vec3::Zero();
  Vec3 rock = Vec3::Zero();
  env::RewardTerms terms;
  env::Termination cause = env::Termination::None;
  arm::JointVector action = arm::JointVector::Zero();
  bool has_extras = false;
  double depth = 0.0;
  double edge_radial = 0.0;
  double edge_height = 0.0;
  int rock_hits = 0;
};

struct Trajectory {
  env::EpisodeInit init;
  std::string rock_name;
  std::uint64_t config_hash = 0;
  std::uint64_t dataset_hash = 0;
  /// Resolved configuration the episode ran with (YAML).
  std::string config_yaml;
  std::vector<Row> rows;
};

std::vector<std::string> csv_columns();

/// Writes `<path>` (CSV) and `<path>.json` (episode initialization) from a recording environment.
void write_trajectory(const std::filesystem::path& path, const env::Environment& env);
/// In-memory trajectory of a recording environment, identical to writing and reading it back.
Trajectory from_environment(const env::Environment& env);
/// Reads the CSV and, when present, its sidecar. Throws ParseError.
Trajectory read_trajectory(const std::filesystem::path& path, bool require_sidecar = true);

struct ReplayReport {
  int steps = 0;
  int mismatches = 0;
  int first_mismatch = -1;
  std::string detail;
  bool identical() const { return mismatches == 0; }
};

/// Re-executes the logged actions from the logged initialization and compares every reward term
/// and the termination cause bitwise.
ReplayReport replay(std::shared_ptr<const env::Context> ctx, const Trajectory& log);

/// Horizontal distance covered by the bucket edge while below the soil surface.
double in_soil_path(const Trajectory& log);

struct PlotResult {
  double path_a = 0.0;
  double path_b = 0.0;
  double ratio = 0.0;  // path_a / path_b
};

/// SVG of the (radial, height) edge paths of two runs aligned at their soil entry point. Returns
/// the in-soil horizontal path lengths and their ratio (first over second).
PlotResult plot_paths(const Trajectory& a, const std::string& label_a, const Trajectory& b,
                      const std::string& label_b, const std::filesystem::path& svg);

}  // namespace boulder::traj
