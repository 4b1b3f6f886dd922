#pragma once

#include <string>

#include "boulder/environment.hpp"

namespace boulder::learn {

struct ScriptedConfig {
  /// Edge depth targeted while dragging, m below the soil surface.
  double depth = 0.12;
  /// Bucket curl held while penetrating and dragging, rad (negative: edge lowered).
  double attack_curl = -0.25;
  /// Dive slope relative to horizontal; kept below |attack_curl| so the plate cuts.
  double dive_slope = 0.2;
  double approach_height = 0.08;
  /// Rock height above the soil at which lifting stops, m.
  double lift_height = 0.7;
  /// Edge height limit while lifting, m.
  double max_lift = 2.5;
  double final_curl = 0.85;
  /// Edge speed along the path, m/s.
  double speed = 0.35;
  double curl_rate = 0.3;
  /// Inward edge speed while curling, m/s.
  double curl_sweep = 0.12;
  double gain = 1.5;
  double align_tolerance = 0.1;
  /// Rock center depth inside the bucket (bucket frame, behind the edge) that ends the drag, m.
  double scoop_inset = 0.2;
};

enum class ScriptPhase { Align, Penetrate, Drag, Curl, Lift };
const char* to_string(ScriptPhase p);

/// Edge state in the rotating base frame: radial distance, height above the soil and curl.
struct EdgeTask {
  double radial = 0.0;
  double height = 0.0;
  double curl = 0.0;
};

EdgeTask edge_task(const EnvConfig& cfg, const arm::JointVector& q);

/// Finite-state scooping controller acting on privileged simulator state. Compensates the
/// command delay by predicting the joint state once every pending command has executed.
class ScriptedPolicy {
 public:
  explicit ScriptedPolicy(ScriptedConfig cfg = {});

  void reset();
  arm::JointVector act(const env::Environment& env);
  ScriptPhase phase() const { return phase_; }
  const ScriptedConfig& config() const { return cfg_; }

 private:
  /// Joint rates tracking a task-space velocity at the predicted configuration.
  arm::JointVector resolve(const EnvConfig& cfg, const arm::JointVector& q, const Eigen::Vector3d& task_rate) const;

  ScriptedConfig cfg_;
  ScriptPhase phase_ = ScriptPhase::Align;
  double drag_height_ = 0.0;
  double hold_radial_ = 0.0;
  double last_height_ = 0.0;
  int stuck_steps_ = 0;
};

}  // namespace boulder::learn
