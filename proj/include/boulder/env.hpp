#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "boulder/arm.hpp"
#include "boulder/common.hpp"
#include "boulder/config.hpp"
#include "boulder/sensor.hpp"

namespace boulder::env {

enum class Termination : int {
  None = 0,
  Timeout = 1,           // T1
  BaseVelocity = 2,      // T2
  JointVelocity = 3,     // T3
  BucketSpeed = 4,       // T4
  Dropped = 5,           // T5
  AngleOfAttack = 6,     // T6
  Success = 7,           // T7
  Fault = 8,             // non-finite state or action
};

const char* to_string(Termination t);
Termination termination_from_string(const std::string& s);
/// Failure causes receive P6: T2-T6 and numeric faults. A timeout is neither success nor failure.
bool is_failure(Termination t);

inline constexpr int kNumRewardTerms = 13;
enum RewardTerm : int { R1, R2, R3, R4, R5, R6, R7, P1, P2, P3, P4, P5, P6 };
extern const std::array<const char*, kNumRewardTerms> kRewardTermNames;

/// Weighted reward terms of one step (weight x expression).
struct RewardTerms {
  std::array<double, kNumRewardTerms> values{};
  double total() const;
};

/// Everything the reward and termination engines look at for one step. Heights are relative to
/// the soil surface; "rotbase" quantities are expressed in the rotating base frame.
struct StepState {
  double time = 0.0;
  Vec3 rock_base = Vec3::Zero();
  Vec3 rock_rotbase = Vec3::Zero();
  double rock_reset_z = 0.0;
  Vec3 bucket_base = Vec3::Zero();
  Vec3 bucket_rotbase = Vec3::Zero();
  Vec3 bucket_velocity = Vec3::Zero();  // linear, relative to and expressed in rotbase
  double bottom_plate_z = 0.0;
  bool in_shovel = false;
  double curl = 0.0;
  double edge_depth = 0.0;
  double edge_speed = 0.0;
  double angle_of_attack = 0.0;
  double base_speed = 0.0;
  arm::JointVector qd = arm::JointVector::Zero();
  arm::JointVector qd_max = arm::JointVector::Ones();
  /// Turn rate commanded by this step's action, rad/s, before deadband and delay.
  double turn_command = 0.0;
  arm::JointVector action = arm::JointVector::Zero();
  arm::JointVector prev_action = arm::JointVector::Zero();
  bool fault = false;
};

struct LevelFlags {
  bool t6 = true;
  bool p5 = false;
};

/// max(0, s - v_max) * 10^max(0, s - v_max).
double p2_expression(double speed, double v_max);
/// P5 expression with both normalized factors clamped to [0, 1].
double p5_expression(double depth, double lateral, const RewardWeights& w);
bool in_soil(const StepState& s, const TerminationLimits& limits);

/// Signed angle between the bottom plate's cutting direction and the edge velocity in the
/// excavation slice. Positive when the velocity points to the underside of the plate (the plate
/// pushes rather than cuts); beyond pi/2 when moving heel first with the underside leading.
double angle_of_attack(const Pose& bucket_base, const Vec3& radial, const Vec2& velocity);

/// Termination cause in priority order Fault > T7 > T2 > T3 > T4 > T5 > T6 > T1.
Termination check_termination(const StepState& s, const TerminationLimits& limits, const RewardWeights& w,
                              const LevelFlags& flags);

RewardTerms compute_rewards(const StepState& s, const RewardWeights& w, const TerminationLimits& limits,
                            const LevelFlags& flags, double turn_deadband, Termination cause);

// ---------------------------------------------------------------------------------------------
// Observation

/// Physical observation before normalization.
struct RawObservation {
  arm::JointVector q = arm::JointVector::Zero();
  arm::JointVector qd = arm::JointVector::Zero();
  arm::JointVector tau = arm::JointVector::Zero();
  double q_turn = 0.0;
  std::vector<double> turn_velocity_history;  // most recent first, length L
  Vec3 bucket_position = Vec3::Zero();
  Quat bucket_orientation = Quat::Identity();
  Vec3 bucket_linear = Vec3::Zero();
  Vec3 bucket_angular = Vec3::Zero();
  sensor::RockCloud cloud;
  arm::JointVector prev_action = arm::JointVector::Zero();
  std::vector<double> turn_action_history;    // most recent first, length L, rad/s
};

struct ObservationBlock {
  std::string name;
  int offset = 0;
  int size = 0;
};

class ObservationLayout {
 public:
  explicit ObservationLayout(const EnvConfig& cfg);

  int size() const { return static_cast<int>(lo_.size()); }
  int history() const { return history_; }
  const std::vector<ObservationBlock>& blocks() const { return blocks_; }
  const ObservationBlock& block(const std::string& name) const;
  const Eigen::VectorXd& lo() const { return lo_; }
  const Eigen::VectorXd& hi() const { return hi_; }

  /// Physical values in layout order (unnormalized).
  Eigen::VectorXd flatten(const RawObservation& raw) const;
  /// Affine map of [lo, hi] onto [-1, 1], clamped.
  Eigen::VectorXd normalize(const Eigen::VectorXd& physical) const;
  Eigen::VectorXd denormalize(const Eigen::VectorXd& normalized) const;
  Eigen::VectorXd observe(const RawObservation& raw) const { return normalize(flatten(raw)); }

  /// Text listing of every channel with its range; stable across builds.
  std::string describe() const;
  std::uint64_t hash() const { return fnv1a(describe()); }

 private:
  void add(const std::string& name, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

  int history_;
  std::vector<ObservationBlock> blocks_;
  std::vector<std::string> channel_names_;
  Eigen::VectorXd lo_, hi_;
};

/// 15 + (1 + L) + 13 + 3 N + 5 + L.
constexpr int observation_size(int history) { return 15 + 1 + history + 13 + 3 * sensor::kCloudSize + 5 + history; }

// ---------------------------------------------------------------------------------------------
// Curriculum

class Curriculum {
 public:
  explicit Curriculum(const CurriculumConfig& cfg);

  int level() const { return level_; }
  bool pinned() const { return pinned_; }
  /// Records an episode outcome; returns true when the level advanced.
  bool record(bool success);
  /// Mean success over the current window (0 when empty).
  double success_rate() const;
  int window_count() const { return static_cast<int>(count_); }
  int window_capacity() const { return static_cast<int>(window_.size()); }

 private:
  int level_;
  bool pinned_;
  double threshold_;
  std::vector<unsigned char> window_;
  std::size_t head_ = 0, count_ = 0, successes_ = 0;
};

}  // namespace boulder::env
