#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "boulder/arm.hpp"
#include "boulder/physics.hpp"
#include "boulder/rockgen.hpp"
#include "boulder/sensor.hpp"
#include "boulder/soil.hpp"

namespace boulder {

inline constexpr int kNumLevels = 5;

/// Shaping weights and constants of the reward table. Penalty weights carry their sign.
struct RewardWeights {
  double r1 = 0.005, r2 = 0.01, r3 = 0.01, r4 = 0.075, r5 = 0.05, r6 = 0.05, r7 = 20.0;
  double p1 = -0.005, p2 = -0.1, p3 = -0.005, p4 = -0.025, p5 = -0.0125, p6 = -0.5;
  double theta_target = 0.5;    // rad
  double h_desired = 0.5;       // m above the soil
  double v_max = 0.6;           // m/s
  double proximity = 1.5;       // m^2, R2 threshold on the squared lateral offset
  double d_soft = 0.05, d_hard = 0.30;
  double y_min = 0.2, y_max = 1.0;
};

struct TerminationLimits {
  double time_limit = 29.0;       // s
  double v_max_base = 0.1;        // m/s
  double v_max_term = 1.2;        // m/s
  double h_min = -0.05;           // m, platform top minus tolerance
  double alpha_threshold = 0.0;   // rad
  /// Edge speed below which the angle of attack is not evaluated, m/s.
  double alpha_min_speed = 0.01;
  /// Edge depth that counts as "in soil" for P4 and T6, m.
  double in_soil_depth = 0.01;
};

/// Sampling region of one curriculum level. Rock offsets are measured from the initial bucket edge
/// in the rotating base frame: `ahead` toward the cabin, `lateral` sideways.
struct LevelSpec {
  double ahead_min = 0.3, ahead_max = 2.8;
  double lateral_half = 0.3;
  double height = 0.4;
  double turn_min = -0.4, turn_max = 0.4;
  double edge_radial_min = 5.6, edge_radial_max = 6.4;
  double edge_height_min = 0.05, edge_height_max = 0.5;
  double curl_min = -0.35, curl_max = 0.0;
  /// Rocks closer to the cabin than this are rejected (sensor blind zone and arm reach).
  double rock_radial_min = 3.0;
  bool t6 = true;
  bool p5 = false;
  bool randomize_soil = false;
};

struct CurriculumConfig {
  int window = 1000;
  double threshold = 0.8;
  int start_level = 0;
  /// Fixed level when >= 0; the curriculum then never advances.
  int pinned_level = -1;
};

/// Normalization ranges; every observation channel maps [lo, hi] onto [-1, 1].
struct ObservationRanges {
  double torque_scale = 2.0;   // multiples of the torque rating
  // Workspace of the arm and of rocks it can reach, in the rotating base frame.
  Vec3 bucket_min = Vec3(1.0, -4.0, -2.5), bucket_max = Vec3(9.0, 4.0, 5.5);
  double bucket_speed = 2.0;   // m/s
  double bucket_rate = 1.5;    // rad/s
  Vec3 rock_min = Vec3(1.0, -4.0, -1.5), rock_max = Vec3(8.0, 4.0, 3.5);
};

enum class SoilMode { Curriculum, Soft, Hard };
enum class RockSize { Any, Small, Large };

struct EnvConfig {
  arm::ArmModel arm = arm::ArmModel::default_excavator();
  double control_dt = 1.0 / 6.0;
  int substeps = 20;
  double max_delay = 1.2;
  int history = 8;
  double turn_deadband = 0.05;
  /// Rigid machine mass resisting base sliding, kg.
  double machine_mass = 12000.0;

  physics::ContactParams contact;
  physics::Ground ground = {0.0, 1.0, 10.0, -8.0, 8.0};
  soil::SoilParams soft = soil::soft_preset();
  soil::SoilParams hard = soil::hard_preset();
  SoilMode soil_mode = SoilMode::Curriculum;
  double cutting_resistance_min = 0.8, cutting_resistance_max = 1.2;

  sensor::SensorModel sensor;
  RewardWeights rewards;
  TerminationLimits limits;
  std::array<LevelSpec, kNumLevels> levels = default_levels();
  CurriculumConfig curriculum;
  ObservationRanges ranges;

  double mass_scale_min = 0.9, mass_scale_max = 1.1;
  double friction_min = 0.35, friction_max = 0.6;

  /// Rocks used for resets.
  rockgen::Split split = rockgen::Split::Train;
  RockSize rock_size = RockSize::Any;

  std::uint64_t seed = 1;

  double physics_dt() const { return control_dt / substeps; }
  /// Throws DomainError on inconsistent values.
  void validate() const;

  static std::array<LevelSpec, kNumLevels> default_levels();
};

EnvConfig load_config(const std::filesystem::path& path);
EnvConfig config_from_yaml(const std::string& text);
std::string config_to_yaml(const EnvConfig& cfg);
void save_config(const EnvConfig& cfg, const std::filesystem::path& path);
/// Fingerprint of the resolved configuration.
std::uint64_t config_hash(const EnvConfig& cfg);

const char* to_string(SoilMode m);
const char* to_string(RockSize s);
SoilMode soil_mode_from_string(const std::string& s);
RockSize rock_size_from_string(const std::string& s);

}  // namespace boulder
