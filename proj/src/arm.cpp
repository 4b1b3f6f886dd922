#include "boulder/arm.hpp"

#include <algorithm>
#include <cmath>

namespace boulder::arm {

namespace {

Pose joint_motion(const JointSpec& j, double q) {
  Pose m = Pose::Identity();
  if (j.kind == JointKind::Revolute) {
    m.linear() = Eigen::AngleAxisd(q, j.axis.normalized()).toRotationMatrix();
  } else {
    m.translation() = j.axis.normalized() * q;
  }
  return m;
}

Pose make_pose(const Mat3& r, const Vec3& t) {
  Pose p = Pose::Identity();
  p.linear() = r;
  p.translation() = t;
  return p;
}

}  // namespace

BucketPlates BucketGeometry::local_plates() const {
  BucketPlates plates;
  const double l = length, w = width, h = height;

  Mat3 r;
  // bottom: interior normal +z
  plates[kBottomPlate].frame = make_pose(Mat3::Identity(), Vec3(-l / 2, 0, 0));
  plates[kBottomPlate].half_x = l / 2;
  plates[kBottomPlate].half_y = w / 2;
  plates[kBottomPlate].free_edges = kEdgePosX;

  // back: interior normal +x
  r.col(0) = Vec3::UnitY();
  r.col(1) = Vec3::UnitZ();
  r.col(2) = Vec3::UnitX();
  plates[kBackPlate].frame = make_pose(r, Vec3(-l, 0, h / 2));
  plates[kBackPlate].half_x = w / 2;
  plates[kBackPlate].half_y = h / 2;
  plates[kBackPlate].free_edges = kEdgePosY;

  // left (+y side): interior normal -y
  r.col(0) = Vec3::UnitX();
  r.col(1) = Vec3::UnitZ();
  r.col(2) = -Vec3::UnitY();
  plates[kLeftPlate].frame = make_pose(r, Vec3(-l / 2, w / 2, h / 2));
  plates[kLeftPlate].half_x = l / 2;
  plates[kLeftPlate].half_y = h / 2;
  plates[kLeftPlate].free_edges = kEdgePosX | kEdgePosY;

  // right (-y side): interior normal +y
  r.col(0) = Vec3::UnitX();
  r.col(1) = -Vec3::UnitZ();
  r.col(2) = Vec3::UnitY();
  plates[kRightPlate].frame = make_pose(r, Vec3(-l / 2, -w / 2, h / 2));
  plates[kRightPlate].half_x = l / 2;
  plates[kRightPlate].half_y = h / 2;
  plates[kRightPlate].free_edges = kEdgePosX | kEdgeNegY;

  for (auto& p : plates) p.thickness = plate_thickness;
  return plates;
}

bool BucketGeometry::contains(const Vec3& p) const {
  return p.x() >= -length && p.x() <= 0.0 && p.z() >= 0.0 && p.z() <= height && std::abs(p.y()) <= width / 2;
}

JointVector ArmModel::q_min() const {
  JointVector v;
  for (int i = 0; i < kNumJoints; ++i) v[i] = joints[i].q_min;
  return v;
}

JointVector ArmModel::q_max() const {
  JointVector v;
  for (int i = 0; i < kNumJoints; ++i) v[i] = joints[i].q_max;
  return v;
}

JointVector ArmModel::qd_max() const {
  JointVector v;
  for (int i = 0; i < kNumJoints; ++i) v[i] = joints[i].qd_max;
  return v;
}

JointVector ArmModel::torque_rating() const {
  JointVector v;
  for (int i = 0; i < kNumJoints; ++i) v[i] = joints[i].torque_rating;
  return v;
}

void ArmModel::validate() const {
  for (int i = 0; i < kNumJoints; ++i) {
    const auto& j = joints[i];
    if (!(j.q_min < j.q_max)) throw DomainError("joint " + std::to_string(i) + ": empty position interval");
    if (!(j.qd_max > 0.0)) throw DomainError("joint " + std::to_string(i) + ": velocity limit must be positive");
    if (!(j.torque_rating > 0.0)) throw DomainError("joint " + std::to_string(i) + ": torque rating must be positive");
    if (j.axis.norm() < 1e-12) throw DomainError("joint " + std::to_string(i) + ": zero axis");
  }
  if (!(bucket.length > 0 && bucket.width > 0 && bucket.height > 0 && bucket.plate_thickness > 0 &&
        bucket.edge_thickness > 0)) {
    throw DomainError("bucket dimensions must be positive");
  }
}

bool ArmModel::within_limits(const JointVector& q, double tol) const {
  for (int i = 0; i < kNumJoints; ++i) {
    if (!(q[i] >= joints[i].q_min - tol && q[i] <= joints[i].q_max + tol)) return false;
  }
  return true;
}

ArmModel ArmModel::default_excavator() {
  ArmModel m;
  auto& turn = m.joints[kTurn];
  turn.kind = JointKind::Revolute;
  turn.axis = Vec3::UnitZ();
  turn.q_min = -1.6;
  turn.q_max = 1.6;
  turn.qd_max = 0.25;
  turn.torque_rating = 1.0e5;

  auto& boom = m.joints[kBoom];
  boom.axis = Vec3::UnitY();
  boom.parent_offset.translation() = Vec3(0.6, 0.0, 1.7);
  boom.q_min = -1.0;
  boom.q_max = 0.6;
  boom.qd_max = 0.25;
  boom.torque_rating = 4.0e5;
  boom.link_mass = 1800.0;
  boom.link_com = Vec3(1.8, 0.0, 0.0);

  auto& stick = m.joints[kStick];
  stick.axis = Vec3::UnitY();
  stick.parent_offset.translation() = Vec3(3.6, 0.0, 0.0);
  stick.q_min = 0.3;
  stick.q_max = 2.8;
  stick.qd_max = 0.35;
  stick.torque_rating = 2.5e5;
  stick.link_mass = 900.0;
  stick.link_com = Vec3(0.85, 0.0, 0.0);

  auto& tele = m.joints[kTele];
  tele.kind = JointKind::Prismatic;
  tele.axis = Vec3::UnitX();
  tele.parent_offset.translation() = Vec3(1.7, 0.0, 0.0);
  tele.q_min = 0.0;
  tele.q_max = 1.2;
  tele.qd_max = 0.3;
  tele.torque_rating = 1.0e5;
  tele.link_mass = 300.0;
  tele.link_com = Vec3(0.3, 0.0, 0.0);

  auto& pitch = m.joints[kPitch];
  pitch.axis = Vec3::UnitY();
  pitch.q_min = -1.2;
  pitch.q_max = 2.6;
  pitch.qd_max = 0.6;
  pitch.torque_rating = 1.5e5;

  // Stick pointing straight down with zero pitch leaves the bucket level, opening toward the cabin.
  const Mat3 tool_rot = rot_y(kPi / 2) * Eigen::AngleAxisd(kPi, Vec3::UnitX()).toRotationMatrix();
  const Vec3 pivot_in_bucket(-m.bucket.length + 0.2, 0.0, m.bucket.height);
  m.tool_offset = make_pose(tool_rot, -(tool_rot * pivot_in_bucket));

  m.sensor_mount = make_pose(Mat3::Identity(), Vec3(0.4, 0.6, 3.1));
  m.base_friction = 0.8;
  return m;
}

ChainFrames chain_frames(const ArmModel& model, const JointVector& q) {
  ChainFrames frames;
  Pose t = Pose::Identity();
  for (int i = 0; i < kNumJoints; ++i) {
    t = t * model.joints[i].parent_offset * joint_motion(model.joints[i], q[i]);
    frames[i] = t;
  }
  frames[kNumJoints] = t * model.tool_offset;
  return frames;
}

BucketPose forward_kinematics(const ArmModel& model, const JointVector& q) {
  if (!model.within_limits(q)) throw DomainError("forward_kinematics: joint vector outside limits");
  const ChainFrames frames = chain_frames(model, q);
  BucketPose pose;
  pose.base = frames[kNumJoints];
  pose.rotbase = rotbase_frame(q[kTurn]).inverse() * pose.base;
  return pose;
}

BucketPlates world_plates(const BucketGeometry& geometry, const Pose& bucket_base) {
  BucketPlates plates = geometry.local_plates();
  for (auto& p : plates) p.frame = bucket_base * p.frame;
  return plates;
}

Eigen::Matrix<double, 3, kNumJoints> point_jacobian(const ArmModel& model, const ChainFrames& frames,
                                                    const Vec3& point) {
  Eigen::Matrix<double, 3, kNumJoints> jac;
  for (int i = 0; i < kNumJoints; ++i) {
    const Vec3 axis = frames[i].linear() * model.joints[i].axis.normalized();
    if (model.joints[i].kind == JointKind::Revolute) {
      jac.col(i) = axis.cross(point - frames[i].translation());
    } else {
      jac.col(i) = axis;
    }
  }
  return jac;
}

Eigen::Matrix<double, 3, kNumJoints> angular_jacobian(const ArmModel& model, const ChainFrames& frames) {
  Eigen::Matrix<double, 3, kNumJoints> jac;
  for (int i = 0; i < kNumJoints; ++i) {
    if (model.joints[i].kind == JointKind::Revolute) {
      jac.col(i) = frames[i].linear() * model.joints[i].axis.normalized();
    } else {
      jac.col(i).setZero();
    }
  }
  return jac;
}

JointVector static_joint_loads(const ArmModel& model, const ChainFrames& frames,
                               std::span<const PointLoad> bucket_loads) {
  JointVector tau = JointVector::Zero();
  for (const auto& load : bucket_loads) {
    tau -= point_jacobian(model, frames, load.point).transpose() * load.force;
  }
  const Vec3 g(0.0, 0.0, -kGravity);
  for (int link = 0; link < kNumJoints; ++link) {
    const double m = model.joints[link].link_mass;
    if (m <= 0.0) continue;
    const Vec3 p = frames[link] * model.joints[link].link_com;
    const auto jac = point_jacobian(model, frames, p);
    // Only joints upstream of the link carry its weight.
    for (int j = 0; j <= link; ++j) tau[j] -= jac.col(j).dot(m * g);
  }
  if (model.bucket.mass > 0.0) {
    const Vec3 p = frames[kNumJoints] * model.bucket.com;
    tau -= point_jacobian(model, frames, p).transpose() * (model.bucket.mass * g);
  }
  return tau;
}

double curl_angle(const Pose& bucket_rotbase) {
  const Vec3 x = bucket_rotbase.linear().col(0);
  return std::atan2(x.z(), -x.x());
}

std::optional<JointVector> solve_planar_ik(const ArmModel& model, double radial, double height, double curl,
                                           const JointVector& seed) {
  constexpr std::array<int, 3> kActive = {kBoom, kStick, kPitch};
  const JointVector lo = model.q_min(), hi = model.q_max();
  JointVector q = seed.cwiseMax(lo).cwiseMin(hi);

  auto residual = [&](const JointVector& qq) {
    const Pose b = forward_kinematics(model, qq).rotbase;
    double dc = curl_angle(b) - curl;
    dc = std::remainder(dc, 2.0 * kPi);
    return Eigen::Vector3d(b.translation().x() - radial, b.translation().z() - height, dc);
  };

  for (int iter = 0; iter < 60; ++iter) {
    const Eigen::Vector3d f = residual(q);
    if (f.head<2>().norm() < 1e-8 && std::abs(f[2]) < 1e-8) return q;
    Eigen::Matrix3d jac;
    for (int k = 0; k < 3; ++k) {
      const int j = kActive[k];
      const double h = 1e-7;
      JointVector qp = q, qm = q;
      qp[j] = std::min(q[j] + h, hi[j]);
      qm[j] = std::max(q[j] - h, lo[j]);
      jac.col(k) = (residual(qp) - residual(qm)) / (qp[j] - qm[j]);
    }
    // Damped least squares keeps steps bounded near singular poses.
    const double lambda = 1e-6;
    const Eigen::Vector3d dq =
        (jac.transpose() * jac + lambda * Eigen::Matrix3d::Identity()).ldlt().solve(-jac.transpose() * f);
    const double scale = std::min(1.0, 0.5 / std::max(dq.cwiseAbs().maxCoeff(), 1e-12));
    for (int k = 0; k < 3; ++k) {
      const int j = kActive[k];
      q[j] = std::clamp(q[j] + scale * dq[k], lo[j], hi[j]);
    }
  }
  const Eigen::Vector3d f = residual(q);
  if (f.head<2>().norm() < 1e-6 && std::abs(f[2]) < 1e-6) return q;
  return std::nullopt;
}

double apply_deadband(double turn_rate, double threshold) {
  if (threshold < 0.0) throw DomainError("deadband threshold must be non-negative");
  return std::abs(turn_rate) < threshold ? 0.0 : turn_rate;
}

int delay_to_steps(double delay, double control_dt) {
  return static_cast<int>(std::ceil(delay / control_dt - 1e-9));
}

ActionPipeline::ActionPipeline(double control_dt, double max_delay, int history_length)
    : control_dt_(control_dt), max_delay_(max_delay) {
  if (!(control_dt > 0.0)) throw DomainError("control period must be positive");
  if (max_delay < 0.0) throw DomainError("maximum delay must be non-negative");
  if (history_length <= 0 || history_length * control_dt < max_delay - 1e-12) {
    throw DomainError("history length must cover the maximum delay");
  }
  buffer_.assign(delay_to_steps(max_delay, control_dt) + 1, JointVector::Zero());
  turn_history_.assign(history_length, 0.0);
}

void ActionPipeline::reset(double delay) {
  if (delay < 0.0 || delay > max_delay_ + 1e-12) throw DomainError("delay outside [0, max_delay]");
  delay_ = delay;
  delay_steps_ = delay_to_steps(delay, control_dt_);
  std::fill(buffer_.begin(), buffer_.end(), JointVector::Zero());
  std::fill(turn_history_.begin(), turn_history_.end(), 0.0);
  head_ = 0;
  turn_head_ = 0;
}

JointVector ActionPipeline::push(const JointVector& command) {
  const int n = static_cast<int>(buffer_.size());
  head_ = (head_ + 1) % n;
  buffer_[head_] = command;
  const int l = static_cast<int>(turn_history_.size());
  turn_head_ = (turn_head_ + 1) % l;
  turn_history_[turn_head_] = command[kTurn];
  return buffer_[(head_ - delay_steps_ + n) % n];
}

double ActionPipeline::turn_history(int i) const {
  const int l = static_cast<int>(turn_history_.size());
  return turn_history_[((turn_head_ - i) % l + l) % l];
}

std::vector<JointVector> ActionPipeline::pending() const {
  const int n = static_cast<int>(buffer_.size());
  std::vector<JointVector> out;
  for (int k = delay_steps_ - 1; k >= 0; --k) out.push_back(buffer_[(head_ - k + n) % n]);
  return out;
}

JointStep integrate_joints(const ArmModel& model, const JointVector& q, const JointVector& qd_cmd, double dt) {
  if (!(dt > 0.0)) throw DomainError("integration step must be positive");
  JointStep out;
  for (int i = 0; i < kNumJoints; ++i) {
    const auto& j = model.joints[i];
    double rate = std::clamp(qd_cmd[i], -j.qd_max, j.qd_max);
    double next = q[i] + dt * rate;
    if (next >= j.q_max) {
      next = j.q_max;
      if (rate > 0.0) rate = 0.0;
    } else if (next <= j.q_min) {
      next = j.q_min;
      if (rate < 0.0) rate = 0.0;
    }
    out.q[i] = next;
    out.qd[i] = rate;
  }
  return out;
}

}  // namespace boulder::arm
