#include <cstdio>
#include <sstream>

#include "boulder/env.hpp"

namespace boulder::env {

namespace {

const char* kJointNames[arm::kNumJoints] = {"turn", "boom", "stick", "tele", "pitch"};
const char* kAxes[3] = {"x", "y", "z"};

Eigen::VectorXd constant(int n, double v) { return Eigen::VectorXd::Constant(n, v); }

}  // namespace

ObservationLayout::ObservationLayout(const EnvConfig& cfg) : history_(cfg.history) {
  const auto& m = cfg.arm;
  const arm::JointVector qd_max = m.qd_max();
  const arm::JointVector torque = cfg.ranges.torque_scale * m.torque_rating();
  const int L = history_;

  add("q", m.q_min(), m.q_max());
  add("qd", -qd_max, qd_max);
  add("tau", -torque, torque);
  add("turn_position", constant(1, m.joints[arm::kTurn].q_min), constant(1, m.joints[arm::kTurn].q_max));
  add("turn_velocity_history", constant(L, -qd_max[arm::kTurn]), constant(L, qd_max[arm::kTurn]));
  add("bucket_position", cfg.ranges.bucket_min, cfg.ranges.bucket_max);
  add("bucket_orientation", constant(4, -1.0), constant(4, 1.0));
  add("bucket_linear_velocity", constant(3, -cfg.ranges.bucket_speed), constant(3, cfg.ranges.bucket_speed));
  add("bucket_angular_velocity", constant(3, -cfg.ranges.bucket_rate), constant(3, cfg.ranges.bucket_rate));
  Eigen::VectorXd rlo(3 * sensor::kCloudSize), rhi(3 * sensor::kCloudSize);
  for (int i = 0; i < sensor::kCloudSize; ++i) {
    rlo.segment<3>(3 * i) = cfg.ranges.rock_min;
    rhi.segment<3>(3 * i) = cfg.ranges.rock_max;
  }
  add("rock_points", rlo, rhi);
  add("prev_action", constant(arm::kNumJoints, -1.0), constant(arm::kNumJoints, 1.0));
  add("turn_action_history", constant(L, -qd_max[arm::kTurn]), constant(L, qd_max[arm::kTurn]));

  auto name = [&](const std::string& block, int i) -> std::string {
    char buf[64];
    if (block == "q" || block == "qd" || block == "tau") return block + "." + kJointNames[i];
    if (block == "bucket_orientation") return block + "." + "wxyz"[i];
    if (block == "bucket_position" || block == "bucket_linear_velocity" || block == "bucket_angular_velocity")
      return block + "." + kAxes[i];
    if (block == "rock_points") {
      std::snprintf(buf, sizeof buf, "rock_points.%02d.%s", i / 3, kAxes[i % 3]);
      return buf;
    }
    if (block == "prev_action") return block + "." + kJointNames[i];
    if (block == "turn_position") return block;
    std::snprintf(buf, sizeof buf, "%s.%d", block.c_str(), i);
    return buf;
  };
  for (const auto& b : blocks_)
    for (int i = 0; i < b.size; ++i) channel_names_.push_back(name(b.name, i));

  if (size() != observation_size(L)) throw DomainError("observation layout size mismatch");
}

void ObservationLayout::add(const std::string& name, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const int offset = static_cast<int>(lo_.size());
  blocks_.push_back({name, offset, static_cast<int>(lo.size())});
  lo_.conservativeResize(offset + lo.size());
  hi_.conservativeResize(offset + hi.size());
  lo_.segment(offset, lo.size()) = lo;
  hi_.segment(offset, hi.size()) = hi;
}

const ObservationBlock& ObservationLayout::block(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw DomainError("no observation block '" + name + "'");
}

Eigen::VectorXd ObservationLayout::flatten(const RawObservation& raw) const {
  if (static_cast<int>(raw.turn_velocity_history.size()) != history_ ||
      static_cast<int>(raw.turn_action_history.size()) != history_) {
    throw DomainError("observation: history length mismatch");
  }
  Eigen::VectorXd x(size());
  int k = 0;
  auto put = [&](double v) { x[k++] = v; };
  for (int i = 0; i < arm::kNumJoints; ++i) put(raw.q[i]);
  for (int i = 0; i < arm::kNumJoints; ++i) put(raw.qd[i]);
  for (int i = 0; i < arm::kNumJoints; ++i) put(raw.tau[i]);
  put(raw.q_turn);
  for (double v : raw.turn_velocity_history) put(v);
  for (int i = 0; i < 3; ++i) put(raw.bucket_position[i]);
  // Canonical hemisphere so the same rotation always maps to the same four numbers.
  Quat qn = raw.bucket_orientation.normalized();
  if (qn.w() < 0.0) qn.coeffs() = -qn.coeffs();
  put(qn.w());
  put(qn.x());
  put(qn.y());
  put(qn.z());
  for (int i = 0; i < 3; ++i) put(raw.bucket_linear[i]);
  for (int i = 0; i < 3; ++i) put(raw.bucket_angular[i]);
  for (const auto& p : raw.cloud.points)
    for (int i = 0; i < 3; ++i) put(p[i]);
  for (int i = 0; i < arm::kNumJoints; ++i) put(raw.prev_action[i]);
  for (double v : raw.turn_action_history) put(v);
  return x;
}

Eigen::VectorXd ObservationLayout::normalize(const Eigen::VectorXd& physical) const {
  Eigen::VectorXd n = (2.0 * (physical - lo_).array() / (hi_ - lo_).array() - 1.0).matrix();
  for (Eigen::Index i = 0; i < n.size(); ++i) {
    n[i] = std::isfinite(n[i]) ? std::clamp(n[i], -1.0, 1.0) : 0.0;
  }
  return n;
}

Eigen::VectorXd ObservationLayout::denormalize(const Eigen::VectorXd& normalized) const {
  return (lo_.array() + (normalized.array() + 1.0) * 0.5 * (hi_ - lo_).array()).matrix();
}

std::string ObservationLayout::describe() const {
  std::ostringstream out;
  out << "observation " << size() << "\n";
  char buf[160];
  for (int i = 0; i < size(); ++i) {
    std::snprintf(buf, sizeof buf, "%3d %-32s %.17g %.17g\n", i, channel_names_[i].c_str(), lo_[i], hi_[i]);
    out << buf;
  }
  return out.str();
}

}  // namespace boulder::env
