#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "boulder/arm.hpp"

using namespace boulder;
using namespace boulder::arm;

namespace {

// Independent chain evaluation: explicit 4x4 products and the Rodrigues formula.
Eigen::Matrix4d oracle_bucket(const ArmModel& m, const JointVector& q) {
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  for (int i = 0; i < kNumJoints; ++i) {
    const auto& j = m.joints[i];
    const Vec3 a = j.axis.normalized();
    Eigen::Matrix4d motion = Eigen::Matrix4d::Identity();
    if (j.kind == JointKind::Revolute) {
      Mat3 k;
      k << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
      motion.topLeftCorner<3, 3>() = Mat3::Identity() + std::sin(q[i]) * k + (1 - std::cos(q[i])) * k * k;
    } else {
      motion.topRightCorner<3, 1>() = a * q[i];
    }
    t = t * j.parent_offset.matrix() * motion;
  }
  return t * m.tool_offset.matrix();
}

JointVector random_q(const ArmModel& m, std::mt19937_64& rng) {
  JointVector q;
  for (int i = 0; i < kNumJoints; ++i) {
    q[i] = std::uniform_real_distribution<double>(m.joints[i].q_min, m.joints[i].q_max)(rng);
  }
  return q;
}

ArmModel straight_chain() {
  ArmModel m = ArmModel::default_excavator();
  const double lengths[] = {0.0, 1.0, 2.0, 3.0, 0.5};
  for (int i = 0; i < kNumJoints; ++i) {
    m.joints[i].parent_offset = Pose::Identity();
    m.joints[i].parent_offset.translation() = Vec3(lengths[i], 0, 0);
    m.joints[i].q_min = -1.0;
    m.joints[i].q_max = 1.0;
  }
  m.tool_offset = Pose::Identity();
  m.tool_offset.translation() = Vec3(0.25, 0, 0);
  return m;
}

}  // namespace

TEST_CASE("identity chain places the bucket at the summed link lengths") {
  const ArmModel m = straight_chain();
  const BucketPose p = forward_kinematics(m, JointVector::Zero());
  CHECK((p.base.translation() - Vec3(6.75, 0, 0)).norm() < 1e-12);
  CHECK((p.base.linear() - Mat3::Identity()).norm() < 1e-12);
}

TEST_CASE("turning by pi/2 rotates the base-frame pose and leaves the rotating-frame pose") {
  const ArmModel m = ArmModel::default_excavator();
  JointVector q0;
  q0 << 0.0, -0.2, 1.5, 0.4, 0.3;
  JointVector q1 = q0;
  q1[kTurn] = kPi / 2;
  const BucketPose a = forward_kinematics(m, q0), b = forward_kinematics(m, q1);
  const Vec3 pa = a.base.translation();
  CHECK((b.base.translation() - Vec3(-pa.y(), pa.x(), pa.z())).norm() < 1e-12);
  CHECK((b.rotbase.translation() - a.rotbase.translation()).norm() < 1e-12);
  CHECK((b.rotbase.linear() - a.rotbase.linear()).norm() < 1e-12);
}

TEST_CASE("forward kinematics matches the matrix-product oracle") {
  const ArmModel m = ArmModel::default_excavator();
  std::mt19937_64 rng(11);
  for (int n = 0; n < 1000; ++n) {
    const JointVector q = random_q(m, rng);
    const Eigen::Matrix4d expect = oracle_bucket(m, q);
    const BucketPose p = forward_kinematics(m, q);
    REQUIRE((p.base.matrix() - expect).cwiseAbs().maxCoeff() < 1e-9);
    Eigen::Matrix4d rz = Eigen::Matrix4d::Identity();
    rz.topLeftCorner<3, 3>() = rot_z(-q[kTurn]);
    REQUIRE((p.rotbase.matrix() - rz * expect).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("forward kinematics rejects out-of-limit joints") {
  const ArmModel m = ArmModel::default_excavator();
  JointVector q;
  q << 0.0, -0.2, 1.5, 0.4, 0.3;
  q[kStick] = m.joints[kStick].q_max + 0.01;
  CHECK_THROWS_AS(forward_kinematics(m, q), DomainError);
}

TEST_CASE("turn joint acts as an isometry about the vertical axis") {
  const ArmModel m = ArmModel::default_excavator();
  std::mt19937_64 rng(5);
  for (int n = 0; n < 200; ++n) {
    JointVector q = random_q(m, rng);
    const Vec3 ref = forward_kinematics(m, q).rotbase.translation();
    const double r0 = forward_kinematics(m, q).base.translation().head<2>().norm();
    q[kTurn] = std::uniform_real_distribution<double>(m.joints[kTurn].q_min, m.joints[kTurn].q_max)(rng);
    const BucketPose p = forward_kinematics(m, q);
    CHECK((p.rotbase.translation() - ref).norm() < 1e-9);
    CHECK(std::abs(p.base.translation().head<2>().norm() - r0) < 1e-9);
  }
}

TEST_CASE("point jacobian matches finite differences of forward kinematics") {
  const ArmModel m = ArmModel::default_excavator();
  std::mt19937_64 rng(3);
  const Vec3 local(-0.3, 0.2, 0.1);
  for (int n = 0; n < 50; ++n) {
    JointVector q = random_q(m, rng);
    q = q.cwiseMax(m.q_min() + JointVector::Constant(1e-4)).cwiseMin(m.q_max() - JointVector::Constant(1e-4));
    const auto jac = point_jacobian(m, chain_frames(m, q), chain_frames(m, q)[kNumJoints] * local);
    for (int j = 0; j < kNumJoints; ++j) {
      JointVector qp = q, qm = q;
      qp[j] += 1e-6;
      qm[j] -= 1e-6;
      const Vec3 fd = (chain_frames(m, qp)[kNumJoints] * local - chain_frames(m, qm)[kNumJoints] * local) / 2e-6;
      CHECK((fd - jac.col(j)).norm() < 1e-6);
    }
  }
}

TEST_CASE("gravity holding effort is the gradient of potential energy") {
  const ArmModel m = ArmModel::default_excavator();
  auto potential = [&](const JointVector& q) {
    const ChainFrames f = chain_frames(m, q);
    double u = 0.0;
    for (int i = 0; i < kNumJoints; ++i) u += m.joints[i].link_mass * kGravity * (f[i] * m.joints[i].link_com).z();
    u += m.bucket.mass * kGravity * (f[kNumJoints] * m.bucket.com).z();
    return u;
  };
  std::mt19937_64 rng(9);
  for (int n = 0; n < 50; ++n) {
    JointVector q = random_q(m, rng);
    const JointVector tau = static_joint_loads(m, chain_frames(m, q), {});
    for (int j = 0; j < kNumJoints; ++j) {
      JointVector qp = q, qm = q;
      qp[j] += 1e-6;
      qm[j] -= 1e-6;
      const double grad = (potential(qp) - potential(qm)) / 2e-6;
      CHECK(std::abs(grad - tau[j]) < 1e-4 * std::max(1.0, std::abs(grad)));
    }
  }
}

TEST_CASE("external loads map through the transposed jacobian") {
  const ArmModel m = ArmModel::default_excavator();
  ArmModel massless = m;
  for (auto& j : massless.joints) j.link_mass = 0.0;
  massless.bucket.mass = 0.0;
  JointVector q;
  q << 0.3, -0.2, 1.5, 0.4, 0.3;
  const ChainFrames f = chain_frames(massless, q);
  const PointLoad load{f[kNumJoints] * Vec3(0, 0, 0), Vec3(1000, -200, 500)};
  const JointVector tau = static_joint_loads(massless, f, std::span<const PointLoad>(&load, 1));
  const JointVector expect = -point_jacobian(massless, f, load.point).transpose() * load.force;
  CHECK((tau - expect).norm() < 1e-9);
}

TEST_CASE("curl angle follows the bottom plate direction") {
  for (double theta : {-0.7, -0.2, 0.0, 0.4, 1.1}) {
    Pose p = Pose::Identity();
    // Heel-to-edge axis (-cos t, 0, sin t).
    p.linear() = rot_y(kPi + theta);
    CHECK(curl_angle(p) == doctest::Approx(theta).epsilon(1e-12));
  }
}

TEST_CASE("planar inverse kinematics reproduces reachable targets") {
  const ArmModel m = ArmModel::default_excavator();
  std::mt19937_64 rng(21);
  int solved = 0;
  for (int n = 0; n < 100; ++n) {
    const JointVector q = random_q(m, rng);
    const Pose b = forward_kinematics(m, q).rotbase;
    JointVector seed = q;
    seed[kBoom] = std::clamp(q[kBoom] + 0.05, m.joints[kBoom].q_min, m.joints[kBoom].q_max);
    seed[kStick] = std::clamp(q[kStick] - 0.05, m.joints[kStick].q_min, m.joints[kStick].q_max);
    const auto sol = solve_planar_ik(m, b.translation().x(), b.translation().z(), curl_angle(b), seed);
    if (!sol) continue;
    ++solved;
    const Pose s = forward_kinematics(m, *sol).rotbase;
    CHECK(std::abs(s.translation().x() - b.translation().x()) < 1e-6);
    CHECK(std::abs(s.translation().z() - b.translation().z()) < 1e-6);
    CHECK(std::abs(std::remainder(curl_angle(s) - curl_angle(b), 2 * kPi)) < 1e-6);
    CHECK(m.within_limits(*sol));
  }
  CHECK(solved >= 80);
}

TEST_CASE("deadband") {
  CHECK(apply_deadband(0.0, 0.05) == 0.0);
  CHECK(apply_deadband(0.02, 0.05) == 0.0);
  CHECK(apply_deadband(-0.30, 0.05) == -0.30);
  CHECK(apply_deadband(0.05, 0.05) == 0.05);
  CHECK_THROWS_AS(apply_deadband(0.1, -1.0), DomainError);
}

TEST_CASE("delay pipeline") {
  SUBCASE("zero delay returns the pushed command") {
    ActionPipeline p(1.0 / 6.0, 1.2, 8);
    p.reset(0.0);
    JointVector a = JointVector::Constant(0.3);
    CHECK(p.push(a) == a);
  }
  SUBCASE("half a second at 6 Hz is three steps") {
    ActionPipeline p(1.0 / 6.0, 1.2, 8);
    p.reset(0.5);
    CHECK(p.delay_steps() == 3);
    std::vector<JointVector> out;
    for (int k = 0; k < 10; ++k) out.push_back(p.push(JointVector::Constant(k + 1)));
    for (int k = 0; k < 3; ++k) CHECK(out[k].isZero());
    for (int k = 3; k < 10; ++k) CHECK(out[k] == JointVector::Constant(k - 2));
  }
  SUBCASE("pending commands are the ones not yet executed") {
    ActionPipeline p(1.0 / 6.0, 1.2, 8);
    p.reset(0.5);
    for (int k = 0; k < 5; ++k) p.push(JointVector::Constant(k + 1));
    const auto pend = p.pending();
    REQUIRE(pend.size() == 3);
    CHECK(pend[0] == JointVector::Constant(3));
    CHECK(pend[2] == JointVector::Constant(5));
  }
  SUBCASE("turn history holds the latest L turn commands") {
    ActionPipeline p(1.0 / 6.0, 1.2, 8);
    p.reset(1.2);
    CHECK(p.delay_steps() == 8);
    for (int k = 0; k < 12; ++k) {
      JointVector a = JointVector::Zero();
      a[kTurn] = k;
      p.push(a);
    }
    for (int i = 0; i < 8; ++i) CHECK(p.turn_history(i) == 11 - i);
  }
  SUBCASE("history too short for the maximum delay is rejected") {
    CHECK_THROWS_AS(ActionPipeline(1.0 / 6.0, 1.2, 7), DomainError);
    CHECK_NOTHROW(ActionPipeline(1.0 / 6.0, 1.2, 8));
  }
  SUBCASE("reset clears state") {
    ActionPipeline p(1.0 / 6.0, 1.2, 8);
    p.reset(0.5);
    for (int k = 0; k < 5; ++k) p.push(JointVector::Constant(1.0));
    p.reset(0.5);
    CHECK(p.push(JointVector::Constant(2.0)).isZero());
    CHECK(p.turn_history(1) == 0.0);
  }
}

TEST_CASE("joint integration") {
  const ArmModel m = ArmModel::default_excavator();
  const JointVector mid = (m.q_min() + m.q_max()) / 2;
  SUBCASE("zero command keeps the state") {
    const JointStep s = integrate_joints(m, mid, JointVector::Zero(), 0.1);
    CHECK(s.q == mid);
    CHECK(s.qd.isZero());
  }
  SUBCASE("upper limit with positive command") {
    const JointStep s = integrate_joints(m, m.q_max(), m.qd_max(), 0.1);
    CHECK(s.q == m.q_max());
    CHECK(s.qd.isZero());
  }
  SUBCASE("saturation") {
    const JointStep s = integrate_joints(m, mid, 2.0 * m.qd_max(), 1e-3);
    CHECK(s.qd == m.qd_max());
  }
  SUBCASE("random sequences stay within limits") {
    std::mt19937_64 rng(1);
    JointVector q = mid;
    for (int n = 0; n < 20000; ++n) {
      JointVector cmd;
      for (int i = 0; i < kNumJoints; ++i) cmd[i] = std::uniform_real_distribution<double>(-3, 3)(rng) * m.qd_max()[i];
      q = integrate_joints(m, q, cmd, 1.0 / 6.0).q;
      REQUIRE(m.within_limits(q, 0.0));
    }
  }
}
