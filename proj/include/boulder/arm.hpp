#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "boulder/common.hpp"

namespace boulder::arm {

inline constexpr int kNumJoints = 5;

/// Fixed joint ordering used by every vector in the project.
enum JointIndex : int { kTurn = 0, kBoom = 1, kStick = 2, kTele = 3, kPitch = 4 };

/// [turn, boom, stick, tele, pitch]; radians for revolute joints, meters for the telescope.
using JointVector = Eigen::Matrix<double, kNumJoints, 1>;

enum class JointKind { Revolute, Prismatic };

struct JointSpec {
  JointKind kind = JointKind::Revolute;
  Vec3 axis = Vec3::UnitY();
  /// Fixed transform from the previous joint's moving frame to this joint's frame.
  Pose parent_offset = Pose::Identity();
  double q_min = -1.0;
  double q_max = 1.0;
  double qd_max = 1.0;
  /// Actuator capacity against external (soil) loads, N·m or N.
  double torque_rating = 1e5;
  double link_mass = 0.0;
  /// Link center of mass in this joint's moving frame.
  Vec3 link_com = Vec3::Zero();
};

/// Oriented thin slab. The frame's +z is the plate's inward (bucket interior) normal and the
/// slab occupies z in [-thickness, 0], |x| <= half_x, |y| <= half_y.
struct Plate {
  Pose frame = Pose::Identity();
  double half_x = 0.0;
  double half_y = 0.0;
  double thickness = 0.0;
  /// Edges the slab can be exited through sideways (kEdge* bits); joined edges are excluded.
  unsigned free_edges = 0;
  /// Velocity of the frame origin and angular velocity, base frame.
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();

  Vec3 normal() const { return frame.linear().col(2); }
  Vec3 center() const { return frame.translation(); }
  Vec3 velocity_at(const Vec3& p) const { return linear_velocity + angular_velocity.cross(p - center()); }
};

enum PlateEdge : unsigned { kEdgePosX = 1u, kEdgeNegX = 2u, kEdgePosY = 4u, kEdgeNegY = 8u };

enum PlateId : int { kBottomPlate = 0, kBackPlate = 1, kLeftPlate = 2, kRightPlate = 3 };
inline constexpr int kNumPlates = 4;
using BucketPlates = std::array<Plate, kNumPlates>;

/// Open-box bucket. The bucket frame origin is the center of the cutting edge on the interior
/// surface of the bottom plate; +x points from the heel toward the edge and +z is the interior
/// normal of the bottom plate.
struct BucketGeometry {
  double length = 1.2;
  double width = 1.4;
  double height = 0.9;
  double plate_thickness = 0.06;
  double edge_thickness = 0.03;
  double mass = 700.0;
  Vec3 com = Vec3(-0.6, 0.0, 0.3);

  /// Plates expressed in the bucket frame.
  BucketPlates local_plates() const;
  /// Lowest point of the leading edge, the reference for soil depth.
  Vec3 edge_point() const { return Vec3(0.0, 0.0, -plate_thickness); }
  /// Inclusive containment test of a bucket-frame point in the open box.
  bool contains(const Vec3& p_bucket) const;
};

struct ArmModel {
  std::array<JointSpec, kNumJoints> joints;
  /// Fixed transform from the pitch joint's moving frame to the bucket frame.
  Pose tool_offset = Pose::Identity();
  BucketGeometry bucket;
  /// Sensor pose in the rotating base frame.
  Pose sensor_mount = Pose::Identity();
  double base_friction = 0.8;

  JointVector q_min() const;
  JointVector q_max() const;
  JointVector qd_max() const;
  JointVector torque_rating() const;

  /// Throws DomainError on empty limit intervals or non-positive rate limits.
  void validate() const;
  bool within_limits(const JointVector& q, double tol = 1e-9) const;

  /// Default geometry approximating a 12 t walking excavator with ~7 m reach.
  static ArmModel default_excavator();
};

struct BucketPose {
  Pose base = Pose::Identity();
  Pose rotbase = Pose::Identity();
};

/// Rotating base frame: the base frame rotated by q_turn about +z.
inline Pose rotbase_frame(double q_turn) {
  Pose t = Pose::Identity();
  t.linear() = rot_z(q_turn);
  return t;
}

/// Moving frames of the chain: one per joint (after its motion) plus the bucket frame.
using ChainFrames = std::array<Pose, kNumJoints + 1>;

ChainFrames chain_frames(const ArmModel& model, const JointVector& q);

/// Bucket pose in the base and rotating base frames. Throws DomainError when q is outside limits.
BucketPose forward_kinematics(const ArmModel& model, const JointVector& q);

/// Bucket plates in the base frame for a given bucket pose.
BucketPlates world_plates(const BucketGeometry& geometry, const Pose& bucket_base);

/// Linear Jacobian (3 x 5) of a base-frame point rigidly attached to the bucket.
Eigen::Matrix<double, 3, kNumJoints> point_jacobian(const ArmModel& model, const ChainFrames& frames,
                                                    const Vec3& point);

/// Angular Jacobian (3 x 5) of the bucket.
Eigen::Matrix<double, 3, kNumJoints> angular_jacobian(const ArmModel& model, const ChainFrames& frames);

struct PointLoad {
  Vec3 point;
  Vec3 force;
};

/// Actuator effort needed to hold the given external point loads on the bucket plus gravity
/// acting on every link (inverse statics).
JointVector static_joint_loads(const ArmModel& model, const ChainFrames& frames,
                               std::span<const PointLoad> bucket_loads);

/// Upward curl of the bottom plate above horizontal in the excavation plane, rad. Zero when the
/// bottom plate is level with the opening facing the cabin; positive when the edge is raised.
double curl_angle(const Pose& bucket_rotbase);

/// Numeric inverse kinematics of the bucket reference point in the radial plane. Solves boom,
/// stick and pitch for a target (radial, height, curl) with turn and telescope held at the
/// seed's values. Returns nullopt if the target is unreachable within limits.
std::optional<JointVector> solve_planar_ik(const ArmModel& model, double radial, double height, double curl,
                                           const JointVector& seed);

/// Zeroes a turn command whose magnitude is strictly below the threshold.
double apply_deadband(double turn_rate, double threshold);

/// Per-episode command delay and turn-command history.
class ActionPipeline {
 public:
  ActionPipeline(double control_dt, double max_delay, int history_length);

  /// Clears both buffers and fixes the delay for the next episode.
  void reset(double delay);

  /// Pushes the command issued this step and returns the one to execute now.
  JointVector push(const JointVector& command);

  int delay_steps() const { return delay_steps_; }
  double delay() const { return delay_; }
  double control_dt() const { return control_dt_; }
  int history_length() const { return static_cast<int>(turn_history_.size()); }
  int capacity() const { return static_cast<int>(buffer_.size()); }

  /// Turn command history, most recent first.
  double turn_history(int i) const;

  /// Commands issued but not yet executed, oldest first.
  std::vector<JointVector> pending() const;

 private:
  double control_dt_;
  double max_delay_;
  double delay_ = 0.0;
  int delay_steps_ = 0;
  std::vector<JointVector> buffer_;
  int head_ = 0;
  std::vector<double> turn_history_;
  int turn_head_ = 0;
};

/// Number of control steps a delay spans, ceil(delay / dt) with round-off guarded.
int delay_to_steps(double delay, double control_dt);

struct JointStep {
  JointVector q;
  JointVector qd;
};

/// Semi-implicit velocity-command integration with rate saturation and position clamping. A joint
/// whose position clamp engages reports a realized rate of zero.
JointStep integrate_joints(const ArmModel& model, const JointVector& q, const JointVector& qd_cmd, double dt);

}  // namespace boulder::arm
