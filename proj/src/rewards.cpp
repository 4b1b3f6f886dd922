#include <algorithm>
#include <cmath>

#include "boulder/env.hpp"

namespace boulder::env {

const std::array<const char*, kNumRewardTerms> kRewardTermNames = {"R1", "R2", "R3", "R4", "R5", "R6", "R7",
                                                                    "P1", "P2", "P3", "P4", "P5", "P6"};

const char* to_string(Termination t) {
  switch (t) {
    case Termination::None: return "none";
    case Termination::Timeout: return "T1";
    case Termination::BaseVelocity: return "T2";
    case Termination::JointVelocity: return "T3";
    case Termination::BucketSpeed: return "T4";
    case Termination::Dropped: return "T5";
    case Termination::AngleOfAttack: return "T6";
    case Termination::Success: return "T7";
    case Termination::Fault: return "fault";
  }
  return "none";
}

Termination termination_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(Termination::Fault); ++i) {
    const auto t = static_cast<Termination>(i);
    if (s == to_string(t)) return t;
  }
  throw DomainError("unknown termination '" + s + "'");
}

bool is_failure(Termination t) {
  switch (t) {
    case Termination::BaseVelocity:
    case Termination::JointVelocity:
    case Termination::BucketSpeed:
    case Termination::Dropped:
    case Termination::AngleOfAttack:
    case Termination::Fault:
      return true;
    default:
      return false;
  }
}

double RewardTerms::total() const {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum;
}

double p2_expression(double speed, double v_max) {
  const double excess = std::max(0.0, speed - v_max);
  return excess * std::pow(10.0, excess);
}

double p5_expression(double depth, double lateral, const RewardWeights& w) {
  const double fd = std::clamp((depth - w.d_soft) / (w.d_hard - w.d_soft), 0.0, 1.0);
  const double fy = std::clamp((std::abs(lateral) - w.y_min) / (w.y_max - w.y_min), 0.0, 1.0);
  return fd * fy;
}

double angle_of_attack(const Pose& bucket_base, const Vec3& radial, const Vec2& velocity) {
  const Vec3 x = bucket_base.linear().col(0);
  const Vec3 z = bucket_base.linear().col(2);
  const Vec2 u = Vec2(x.dot(radial), x.z()).normalized();
  const Vec2 n = Vec2(z.dot(radial), z.z()).normalized();
  return std::atan2(-velocity.dot(n), velocity.dot(u));
}

bool in_soil(const StepState& s, const TerminationLimits& limits) { return s.edge_depth > limits.in_soil_depth; }

Termination check_termination(const StepState& s, const TerminationLimits& limits, const RewardWeights& w,
                              const LevelFlags& flags) {
  if (s.fault) return Termination::Fault;
  if (s.in_shovel && s.curl > w.theta_target && s.rock_base.z() > w.h_desired) return Termination::Success;
  if (s.base_speed > limits.v_max_base) return Termination::BaseVelocity;
  for (int i = 0; i < arm::kNumJoints; ++i) {
    if (std::abs(s.qd[i]) > s.qd_max[i] * (1.0 + 1e-9)) return Termination::JointVelocity;
  }
  if (s.bucket_velocity.norm() > limits.v_max_term) return Termination::BucketSpeed;
  if (s.rock_base.z() < limits.h_min) return Termination::Dropped;
  if (flags.t6 && in_soil(s, limits) && s.edge_speed > limits.alpha_min_speed &&
      s.angle_of_attack > limits.alpha_threshold) {
    return Termination::AngleOfAttack;
  }
  if (s.time >= limits.time_limit - 1e-9) return Termination::Timeout;
  return Termination::None;
}

RewardTerms compute_rewards(const StepState& s, const RewardWeights& w, const TerminationLimits& limits,
                            const LevelFlags& flags, double turn_deadband, Termination cause) {
  RewardTerms r;
  auto& v = r.values;
  const double rock_y = s.rock_rotbase.y();
  const double lateral = rock_y - s.bucket_rotbase.y();
  const bool near = lateral * lateral < w.proximity;
  const bool turning = std::abs(s.turn_command) >= turn_deadband;

  v[R1] = w.r1 * std::exp(-rock_y * rock_y);
  v[R2] = near ? w.r2 : 0.0;
  v[R3] = (near && s.bottom_plate_z < s.rock_base.z()) ? w.r3 : 0.0;
  v[R4] = s.in_shovel ? w.r4 : 0.0;
  v[R5] = (s.in_shovel && s.curl > w.theta_target) ? w.r5 : 0.0;
  const double dz = s.bucket_base.z() - w.h_desired;
  v[R6] = (s.rock_base.z() - s.rock_reset_z > 0.0 && s.in_shovel) ? w.r6 * std::exp(-dz * dz) : 0.0;
  v[R7] = cause == Termination::Success ? w.r7 : 0.0;
  v[P1] = w.p1 * (s.action - s.prev_action).squaredNorm();
  v[P2] = w.p2 * p2_expression(s.bucket_velocity.norm(), w.v_max);
  v[P3] = turning ? w.p3 : 0.0;
  v[P4] = (turning && in_soil(s, limits)) ? w.p4 : 0.0;
  v[P5] = flags.p5 ? w.p5 * p5_expression(s.edge_depth, lateral, w) : 0.0;
  v[P6] = is_failure(cause) ? w.p6 : 0.0;
  for (auto& x : v) {
    if (!std::isfinite(x)) x = 0.0;
  }
  return r;
}

}  // namespace boulder::env
