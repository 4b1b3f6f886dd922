#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "boulder/config.hpp"
#include "boulder/env.hpp"
#include "boulder/physics.hpp"
#include "boulder/reset_cache.hpp"
#include "boulder/sensor.hpp"
#include "boulder/soil.hpp"

namespace boulder::env {

/// Read-only data shared by every environment of a run.
struct Context {
  EnvConfig cfg;
  RockLibrary rocks;
  std::array<std::optional<ResetCache>, kNumLevels> caches;
  sensor::VirtualLidar lidar;
  ObservationLayout layout;

  Context(EnvConfig config, RockLibrary library);
  /// Loads (or, when `populate_missing`, generates and stores) the cache file for every level.
  void attach_caches(const std::filesystem::path& dir, std::uint64_t cache_seed, int count, bool populate_missing);
  void set_cache(ResetCache cache);
};

/// Everything needed to reproduce an episode exactly.
struct EpisodeInit {
  int level = 0;
  int entry = -1;
  int rock = 0;
  arm::JointVector q = arm::JointVector::Zero();
  Vec3 rock_position = Vec3::Zero();
  Quat rock_orientation = Quat::Identity();
  double delay = 0.0;
  double mass_scale = 1.0;
  double friction = 0.5;
  soil::SoilParams soil;
  LevelFlags flags;
  std::uint64_t noise_seed = 0;
};

/// Per-step quantities logged to trajectories and used by the scripted controller.
struct StepRecord {
  double time = 0.0;
  arm::JointVector q, qd, tau;
  /// Action as passed to step(), before clipping.
  arm::JointVector action = arm::JointVector::Zero();
  Pose bucket_base = Pose::Identity();
  Vec3 rock_position = Vec3::Zero();
  Quat rock_orientation = Quat::Identity();
  RewardTerms terms;
  Termination cause = Termination::None;
  double edge_depth = 0.0;
  double edge_radial = 0.0;
  double edge_height = 0.0;
  int rock_hits = 0;
  sensor::RockCloud cloud;
};

struct StepResult {
  double reward = 0.0;
  RewardTerms terms;
  Termination cause = Termination::None;
  bool done = false;
  /// Done only because of the time limit; the value of the final state may be bootstrapped.
  bool timeout = false;
  StepState state;
};

class Environment {
 public:
  Environment(std::shared_ptr<const Context> ctx, std::uint64_t seed);

  /// Draws an initial state for the level from the cache and this environment's random stream.
  EpisodeInit sample_init(int level);
  const Eigen::VectorXd& reset(int level);
  const Eigen::VectorXd& reset(const EpisodeInit& init);

  /// Normalized action in [-1, 1]^5 (values outside are clipped; non-finite values fault).
  StepResult step(const arm::JointVector& action);

  const Eigen::VectorXd& observation() const { return obs_; }
  bool done() const { return done_; }
  int steps() const { return steps_; }
  double time() const { return steps_ * ctx_->cfg.control_dt; }
  const EpisodeInit& init() const { return init_; }
  const EnvConfig& config() const { return ctx_->cfg; }
  const Context& context() const { return *ctx_; }

  const arm::JointVector& q() const { return q_; }
  const arm::JointVector& qd() const { return qd_; }
  const arm::JointVector& tau() const { return tau_; }
  const physics::RockBody& rock() const { return rock_; }
  const arm::ActionPipeline& pipeline() const { return pipeline_; }
  const sensor::RockCloud& cloud() const { return cloud_; }
  Pose bucket_base() const;
  RawObservation raw_observation() const;

  /// Per-step records since the last reset (index 0 is the reset state).
  void set_recording(bool on) { recording_ = on; }
  const std::vector<StepRecord>& records() const { return records_; }

 private:
  struct SubstepOutput {
    Vec3 soil_force = Vec3::Zero();
    Vec3 soil_point = Vec3::Zero();
    std::vector<physics::ContactForce> contact_forces;
    soil::CutState cut;
  };

  /// Joint rates with joints zeroed whose actuators cannot overcome the soil load.
  arm::JointVector derate(const arm::ChainFrames& frames, const arm::JointVector& qd, soil::SoilLoad* load) const;
  SubstepOutput substep(const arm::JointVector& command, double h);
  void sense();
  void update_torques(const SubstepOutput& out);
  StepState build_state(const SubstepOutput& out, double base_speed) const;
  void record(const StepResult* result, const soil::CutState& cut);

  std::shared_ptr<const Context> ctx_;
  Rng rng_;
  Rng noise_rng_;
  /// Usable cache entries per level after the rock size filter.
  std::array<std::vector<int>, kNumLevels> entries_;

  EpisodeInit init_;
  arm::JointVector q_ = arm::JointVector::Zero();
  arm::JointVector qd_ = arm::JointVector::Zero();
  arm::JointVector tau_ = arm::JointVector::Zero();
  arm::JointVector prev_action_ = arm::JointVector::Zero();
  arm::JointVector action_ = arm::JointVector::Zero();
  physics::RockBody rock_;
  arm::ActionPipeline pipeline_;
  std::vector<double> turn_velocity_history_;
  int turn_velocity_head_ = 0;
  sensor::RockCloud cloud_;
  int rock_hits_ = 0;
  int steps_ = 0;
  bool done_ = true;
  Eigen::VectorXd obs_;
  bool recording_ = false;
  std::vector<StepRecord> records_;
};

}  // namespace boulder::env
