#include "boulder/scripted.hpp"

#include <algorithm>
#include <cmath>

namespace boulder::learn {

const char* to_string(ScriptPhase p) {
  switch (p) {
    case ScriptPhase::Align: return "align";
    case ScriptPhase::Penetrate: return "penetrate";
    case ScriptPhase::Drag: return "drag";
    case ScriptPhase::Curl: return "curl";
    case ScriptPhase::Lift: return "lift";
  }
  return "align";
}

EdgeTask edge_task(const EnvConfig& cfg, const arm::JointVector& q) {
  const auto frames = arm::chain_frames(cfg.arm, q);
  const Pose rot = arm::rotbase_frame(q[arm::kTurn]).inverse() * frames[arm::kNumJoints];
  const Vec3 edge = rot * cfg.arm.bucket.edge_point();
  return {edge.x(), edge.z() - cfg.ground.height, arm::curl_angle(rot)};
}

namespace {

Eigen::Vector3d as_vector(const EdgeTask& t) { return {t.radial, t.height, t.curl}; }

double clamp_abs(double v, double m) { return std::clamp(v, -m, m); }

}  // namespace

ScriptedPolicy::ScriptedPolicy(ScriptedConfig cfg) : cfg_(cfg) {}

void ScriptedPolicy::reset() {
  phase_ = ScriptPhase::Align;
  drag_height_ = 0.0;
  hold_radial_ = 0.0;
  last_height_ = 0.0;
  stuck_steps_ = 0;
}

arm::JointVector ScriptedPolicy::resolve(const EnvConfig& cfg, const arm::JointVector& q,
                                         const Eigen::Vector3d& task_rate) const {
  const arm::JointVector lo = cfg.arm.q_min(), hi = cfg.arm.q_max(), qd_max = cfg.arm.qd_max();
  Eigen::Matrix<double, 3, 4> J;
  for (int j = 0; j < 4; ++j) {
    const int i = j + 1;
    const double h = 1e-6;
    arm::JointVector a = q, b = q;
    a[i] += h;
    b[i] -= h;
    J.col(j) = (as_vector(edge_task(cfg, a)) - as_vector(edge_task(cfg, b))) / (2 * h);
  }
  // Joints are weighted by their rate limits so the solution spreads motion evenly.
  const Eigen::Vector4d w = qd_max.segment<4>(1);
  const Eigen::Matrix<double, 3, 4> Jw = J * w.asDiagonal();
  const Mat3 JJt = Jw * Jw.transpose() + 1e-4 * Mat3::Identity();
  const Eigen::Matrix<double, 4, 3> pinv = Jw.transpose() * JJt.inverse();
  Eigen::Vector4d u = pinv * task_rate;

  // Null-space pull toward mid-range keeps the telescope and stick away from their stops.
  Eigen::Vector4d center;
  for (int j = 0; j < 4; ++j) {
    const int i = j + 1;
    center[j] = 0.3 * (0.5 * (lo[i] + hi[i]) - q[i]) / (hi[i] - lo[i]) * 2.0;
  }
  const Eigen::Matrix4d null = Eigen::Matrix4d::Identity() - pinv * Jw;
  u += null * center;

  Eigen::Vector4d rate = w.asDiagonal() * u;
  double scale = 1.0;
  for (int j = 0; j < 4; ++j) scale = std::max(scale, std::abs(rate[j]) / qd_max[j + 1]);
  rate /= scale;

  arm::JointVector out = arm::JointVector::Zero();
  out.segment<4>(1) = rate;
  return out;
}

arm::JointVector ScriptedPolicy::act(const env::Environment& env) {
  const EnvConfig& cfg = env.config();
  const double dt = cfg.control_dt;
  const arm::JointVector lo = cfg.arm.q_min(), hi = cfg.arm.q_max(), qd_max = cfg.arm.qd_max();

  // Smith predictor: the state at which the next command will start executing.
  arm::JointVector qp = env.q();
  for (const auto& cmd : env.pipeline().pending()) qp = (qp + dt * cmd).cwiseMax(lo).cwiseMin(hi);

  const EdgeTask now = edge_task(cfg, env.q());
  const EdgeTask pred = edge_task(cfg, qp);
  const Vec3 rock_rot = rot_z(-qp[arm::kTurn]) * env.rock().position;
  const double rock_radius = env.rock().mesh->bounding_radius();
  const Vec3 rock_bucket = env.bucket_base().inverse() * env.rock().position;

  Eigen::Vector3d target = as_vector(pred);
  Eigen::Vector3d feedforward = Eigen::Vector3d::Zero();
  double turn_rate = 0.0;

  switch (phase_) {
    case ScriptPhase::Align: {
      if (hold_radial_ == 0.0) hold_radial_ = std::max(pred.radial, rock_rot.x() + rock_radius + 0.3);
      target = {hold_radial_, cfg_.approach_height, cfg_.attack_curl};
      const double azimuth = std::atan2(rock_rot.y(), rock_rot.x());
      turn_rate = cfg_.gain * azimuth;
      // Below the deadband the command would be dropped; push through it while misaligned.
      if (std::abs(rock_rot.y()) > 0.5 * cfg_.align_tolerance)
        turn_rate = std::copysign(std::max(std::abs(turn_rate), 1.2 * cfg.turn_deadband), azimuth);
      else
        turn_rate = 0.0;
      const bool posed = (target - as_vector(pred)).cwiseAbs().maxCoeff() < 0.03;
      if (posed && std::abs(rock_rot.y()) < cfg_.align_tolerance) {
        phase_ = ScriptPhase::Penetrate;
        last_height_ = now.height;
      }
      break;
    }
    case ScriptPhase::Penetrate: {
      feedforward = {-cfg_.speed * std::cos(cfg_.dive_slope), -cfg_.speed * std::sin(cfg_.dive_slope), 0.0};
      target = {pred.radial, pred.height, cfg_.attack_curl};
      if (now.height < 0.0) {
        stuck_steps_ = now.height < last_height_ - 1e-3 ? 0 : stuck_steps_ + 1;
        last_height_ = std::min(last_height_, now.height);
      }
      if (pred.height <= -cfg_.depth || stuck_steps_ >= 6) {
        drag_height_ = std::max(-cfg_.depth, std::min(now.height, pred.height));
        phase_ = ScriptPhase::Drag;
      }
      break;
    }
    case ScriptPhase::Drag: {
      feedforward = {-cfg_.speed, 0.0, 0.0};
      target = {pred.radial, drag_height_, cfg_.attack_curl};
      const bool scooped = physics::rock_in_shovel(env.rock().position, cfg.arm.bucket, env.bucket_base()) &&
                           rock_bucket.x() < -cfg_.scoop_inset;
      const bool exhausted = std::abs(qp[arm::kStick] - hi[arm::kStick]) < 1e-3 && qp[arm::kTele] <= lo[arm::kTele] + 1e-3;
      if (scooped || exhausted || pred.radial < 2.5) {
        hold_radial_ = pred.radial;
        phase_ = ScriptPhase::Curl;
      }
      break;
    }
    case ScriptPhase::Curl: {
      // Keep sweeping inward so the rock is not pushed back out over the edge.
      feedforward = {-cfg_.curl_sweep, 0.0, cfg_.curl_rate};
      target = {pred.radial, pred.height, pred.curl};
      hold_radial_ = pred.radial;
      if (pred.curl >= cfg_.final_curl) phase_ = ScriptPhase::Lift;
      break;
    }
    case ScriptPhase::Lift: {
      feedforward = {0.0, 0.8 * cfg_.speed, 0.0};
      target = {hold_radial_, pred.height, cfg_.final_curl};
      const double rock_height = env.rock().position.z() - cfg.ground.height;
      if (pred.height >= cfg_.max_lift || rock_height >= cfg_.lift_height) feedforward.setZero();
      break;
    }
  }

  Eigen::Vector3d rate = feedforward + cfg_.gain * (target - as_vector(pred));
  const double linear = rate.head<2>().norm();
  if (linear > cfg_.speed) rate.head<2>() *= cfg_.speed / linear;
  rate.z() = clamp_abs(rate.z(), cfg_.curl_rate);

  arm::JointVector qd = resolve(cfg, qp, rate);
  qd[arm::kTurn] = clamp_abs(turn_rate, qd_max[arm::kTurn]);
  return qd.cwiseQuotient(qd_max).cwiseMax(-1.0).cwiseMin(1.0);
}

}  // namespace boulder::learn
