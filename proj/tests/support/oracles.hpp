#pragma once
// Independent reference implementations shared by the unit tests and the acceptance binary.

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <vector>

#include "boulder/environment.hpp"
#include "boulder/learn.hpp"
#include "boulder/physics.hpp"
#include "boulder/soil.hpp"

namespace boulder::oracle {

using namespace boulder::env;

// Straight transcription of the reward table, kept apart from the library implementation.
struct TableOracle {
  double r1(double rock_y) const { return 0.005 * std::exp(-std::abs(rock_y) * std::abs(rock_y)); }
  double r2(double rock_y, double bucket_y) const {
    return std::pow(std::abs(rock_y - bucket_y), 2) < 1.5 ? 0.01 : 0.0;
  }
  double r3(double rock_y, double bucket_y, double plate_z, double rock_z) const {
    return (r2(rock_y, bucket_y) != 0.0 && plate_z < rock_z) ? 0.01 : 0.0;
  }
  double r4(bool in) const { return in ? 0.075 : 0.0; }
  double r5(bool in, double curl) const { return (in && curl > 0.5) ? 0.05 : 0.0; }
  double r6(double dz, bool in, double bucket_z) const {
    return (dz > 0 && in) ? 0.05 * std::exp(-std::pow(std::abs(bucket_z - 0.5), 2)) : 0.0;
  }
  double p1(const arm::JointVector& a, const arm::JointVector& b) const {
    double s = 0;
    for (int i = 0; i < 5; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return -0.005 * s;
  }
  double p2(double v) const {
    const double e = v - 0.6 > 0 ? v - 0.6 : 0.0;
    return -0.1 * e * std::pow(10.0, e);
  }
  double p3(double turn) const { return std::abs(turn) >= 0.05 ? -0.005 : 0.0; }
  double p4(bool soil, double turn) const { return (soil && std::abs(turn) >= 0.05) ? -0.025 : 0.0; }
  double p5(double d, double y) const {
    double fd = (d - 0.05) / (0.30 - 0.05), fy = (std::abs(y) - 0.2) / (1.0 - 0.2);
    fd = fd < 0 ? 0 : (fd > 1 ? 1 : fd);
    fy = fy < 0 ? 0 : (fy > 1 ? 1 : fy);
    return -0.0125 * fd * fy;
  }
};

inline StepState neutral_state() {
  StepState s;
  s.time = 1.0;
  s.rock_base = Vec3(5.0, 4.0, 0.2);
  s.rock_rotbase = Vec3(5.0, 4.0, 0.2);
  s.rock_reset_z = 0.2;
  s.bucket_base = Vec3(6.0, 0.0, 0.3);
  s.bucket_rotbase = Vec3(6.0, 0.0, 0.3);
  s.bottom_plate_z = 0.3;
  s.qd_max = EnvConfig{}.arm.qd_max();
  return s;
}

struct RewardRow {
  const char* name;
  RewardTerm term;
  std::function<void(StepState&, LevelFlags&)> build;
  std::function<double(const StepState&)> expected;
  // Rows quoting a rounded published value compare at the rounding, the rest at 1e-9.
  double tolerance = 1e-9;
};

struct TerminationRow {
  const char* name;
  std::function<void(StepState&, LevelFlags&)> build;
  Termination expected;
};

/// Hand-built states for every reward row; expected values come from TableOracle.
inline std::vector<RewardRow> reward_rows() {
  static const TableOracle o;
  return {
      {"R1 aligned", R1, [](StepState& s, LevelFlags&) { s.rock_rotbase.y() = 0.0; },
       [](const StepState& s) { return o.r1(s.rock_rotbase.y()); }},
      {"R1 offset", R1, [](StepState& s, LevelFlags&) { s.rock_rotbase.y() = -0.7; },
       [](const StepState& s) { return o.r1(s.rock_rotbase.y()); }},
      {"R2 near", R2, [](StepState& s, LevelFlags&) { s.rock_rotbase.y() = 1.1; s.bucket_rotbase.y() = 0.0; },
       [](const StepState& s) { return o.r2(s.rock_rotbase.y(), s.bucket_rotbase.y()); }},
      {"R2 boundary", R2, [](StepState& s, LevelFlags&) { s.rock_rotbase.y() = std::sqrt(1.5); },
       [](const StepState& s) { return o.r2(s.rock_rotbase.y(), s.bucket_rotbase.y()); }},
      {"R3 beneath", R3,
       [](StepState& s, LevelFlags&) {
         s.rock_rotbase.y() = 0.2;
         s.bottom_plate_z = 0.1;
         s.rock_base.z() = 0.25;
       },
       [](const StepState& s) {
         return o.r3(s.rock_rotbase.y(), s.bucket_rotbase.y(), s.bottom_plate_z, s.rock_base.z());
       }},
      {"R3 above", R3,
       [](StepState& s, LevelFlags&) {
         s.rock_rotbase.y() = 0.2;
         s.bottom_plate_z = 0.4;
       },
       [](const StepState& s) {
         return o.r3(s.rock_rotbase.y(), s.bucket_rotbase.y(), s.bottom_plate_z, s.rock_base.z());
       }},
      {"R4 in shovel", R4, [](StepState& s, LevelFlags&) { s.in_shovel = true; },
       [](const StepState& s) { return o.r4(s.in_shovel); }},
      {"R5 curled", R5, [](StepState& s, LevelFlags&) { s.in_shovel = true; s.curl = 0.6; },
       [](const StepState& s) { return o.r5(s.in_shovel, s.curl); }},
      {"R5 shallow curl", R5, [](StepState& s, LevelFlags&) { s.in_shovel = true; s.curl = 0.5; },
       [](const StepState& s) { return o.r5(s.in_shovel, s.curl); }},
      {"R6 lifted", R6,
       [](StepState& s, LevelFlags&) {
         s.in_shovel = true;
         s.rock_base.z() = 0.45;
         s.bucket_base.z() = 0.9;
       },
       [](const StepState& s) { return o.r6(s.rock_base.z() - s.rock_reset_z, s.in_shovel, s.bucket_base.z()); }},
      {"R6 not lifted", R6, [](StepState& s, LevelFlags&) { s.in_shovel = true; s.rock_base.z() = 0.2; },
       [](const StepState& s) { return o.r6(s.rock_base.z() - s.rock_reset_z, s.in_shovel, s.bucket_base.z()); }},
      {"P1 jump", P1,
       [](StepState& s, LevelFlags&) {
         s.action << 0.5, -0.2, 1.0, 0.0, -1.0;
         s.prev_action << -0.5, 0.1, 0.3, 0.0, 1.0;
       },
       [](const StepState& s) { return o.p1(s.action, s.prev_action); }},
      {"P2 at 0.8", P2, [](StepState& s, LevelFlags&) { s.bucket_velocity = Vec3(0.0, 0.8, 0.0); },
       [](const StepState&) { return -0.031698; }, 5e-7},
      {"P2 at 0.8 table", P2, [](StepState& s, LevelFlags&) { s.bucket_velocity = Vec3(0.0, 0.8, 0.0); },
       [](const StepState& s) { return o.p2(s.bucket_velocity.norm()); }},
      {"P2 below", P2, [](StepState& s, LevelFlags&) { s.bucket_velocity = Vec3(0.3, 0.3, 0.3); },
       [](const StepState& s) { return o.p2(s.bucket_velocity.norm()); }},
      {"P2 fast", P2, [](StepState& s, LevelFlags&) { s.bucket_velocity = Vec3(1.0, -0.5, 0.4); },
       [](const StepState& s) { return o.p2(s.bucket_velocity.norm()); }},
      {"P3 turning", P3, [](StepState& s, LevelFlags&) { s.turn_command = -0.05; },
       [](const StepState& s) { return o.p3(s.turn_command); }},
      {"P3 deadband", P3, [](StepState& s, LevelFlags&) { s.turn_command = 0.049; },
       [](const StepState& s) { return o.p3(s.turn_command); }},
      {"P4 turning in soil", P4,
       [](StepState& s, LevelFlags&) {
         s.turn_command = 0.2;
         s.edge_depth = 0.1;
       },
       [](const StepState& s) { return o.p4(true, s.turn_command); }},
      {"P4 turning in air", P4, [](StepState& s, LevelFlags&) { s.turn_command = 0.2; },
       [](const StepState& s) { return o.p4(false, s.turn_command); }},
      {"P5 deep misaligned", P5,
       [](StepState& s, LevelFlags& f) {
         f.p5 = true;
         s.edge_depth = 0.2;
         s.rock_rotbase.y() = 0.7;
       },
       [](const StepState& s) { return o.p5(s.edge_depth, s.rock_rotbase.y() - s.bucket_rotbase.y()); }},
      {"P5 saturated", P5,
       [](StepState& s, LevelFlags& f) {
         f.p5 = true;
         s.edge_depth = 0.5;
         s.rock_rotbase.y() = -2.0;
       },
       [](const StepState&) { return -0.0125; }},
      {"P5 disabled", P5,
       [](StepState& s, LevelFlags& f) {
         f.p5 = false;
         s.edge_depth = 0.2;
         s.rock_rotbase.y() = 0.7;
       },
       [](const StepState&) { return 0.0; }},
  };
}

/// One constructed state per termination row plus the priority cases.
inline std::vector<TerminationRow> termination_rows() {
  return {
      {"nothing", [](StepState&, LevelFlags&) {}, Termination::None},
      {"T1 at 29 s", [](StepState& s, LevelFlags&) { s.time = 29.0; }, Termination::Timeout},
      {"T1 just before", [](StepState& s, LevelFlags&) { s.time = 29.0 - 1e-6; }, Termination::None},
      {"T1 after 174 steps", [](StepState& s, LevelFlags&) { s.time = 174 * (1.0 / 6.0); }, Termination::Timeout},
      {"T2 base slip", [](StepState& s, LevelFlags&) { s.base_speed = 0.11; }, Termination::BaseVelocity},
      {"T2 at limit", [](StepState& s, LevelFlags&) { s.base_speed = 0.1; }, Termination::None},
      {"T3 stick", [](StepState& s, LevelFlags&) { s.qd[arm::kStick] = -0.36; }, Termination::JointVelocity},
      {"T3 at limit", [](StepState& s, LevelFlags&) { s.qd[arm::kStick] = 0.35; }, Termination::None},
      {"T4 fast bucket", [](StepState& s, LevelFlags&) { s.bucket_velocity = Vec3(0.0, 1.0, 0.7); },
       Termination::BucketSpeed},
      {"T4 at limit", [](StepState& s, LevelFlags&) { s.bucket_velocity = Vec3(1.2, 0.0, 0.0); }, Termination::None},
      {"T5 dropped", [](StepState& s, LevelFlags&) { s.rock_base.z() = -0.06; }, Termination::Dropped},
      {"T6 pushing", [](StepState& s, LevelFlags&) {
         s.edge_depth = 0.1;
         s.edge_speed = 0.2;
         s.angle_of_attack = 0.3;
       },
       Termination::AngleOfAttack},
      {"T6 disabled", [](StepState& s, LevelFlags& f) {
         f.t6 = false;
         s.edge_depth = 0.1;
         s.edge_speed = 0.2;
         s.angle_of_attack = 0.3;
       },
       Termination::None},
      {"T6 out of soil", [](StepState& s, LevelFlags&) {
         s.edge_depth = 0.0;
         s.edge_speed = 0.2;
         s.angle_of_attack = 0.3;
       },
       Termination::None},
      {"T6 cutting", [](StepState& s, LevelFlags&) {
         s.edge_depth = 0.1;
         s.edge_speed = 0.2;
         s.angle_of_attack = -0.2;
       },
       Termination::None},
      {"T7 all three", [](StepState& s, LevelFlags&) {
         s.in_shovel = true;
         s.curl = 0.51;
         s.rock_base.z() = 0.51;
       },
       Termination::Success},
      {"T7 missing curl", [](StepState& s, LevelFlags&) {
         s.in_shovel = true;
         s.curl = 0.49;
         s.rock_base.z() = 0.6;
       },
       Termination::None},
      {"T7 missing height", [](StepState& s, LevelFlags&) {
         s.in_shovel = true;
         s.curl = 0.6;
         s.rock_base.z() = 0.49;
       },
       Termination::None},
      {"T7 not in shovel", [](StepState& s, LevelFlags&) {
         s.curl = 0.6;
         s.rock_base.z() = 0.6;
       },
       Termination::None},
      {"T7 beats timeout", [](StepState& s, LevelFlags&) {
         s.time = 29.0;
         s.in_shovel = true;
         s.curl = 0.6;
         s.rock_base.z() = 0.6;
       },
       Termination::Success},
      {"T2 beats T4", [](StepState& s, LevelFlags&) {
         s.base_speed = 0.2;
         s.bucket_velocity = Vec3(2, 0, 0);
       },
       Termination::BaseVelocity},
      {"fault first", [](StepState& s, LevelFlags&) {
         s.fault = true;
         s.in_shovel = true;
         s.curl = 0.6;
         s.rock_base.z() = 0.6;
       },
       Termination::Fault},
  };
}

// Force balance on the soil wedge in the cutting plane: weight, blade force at delta to the blade
// normal plus adhesion along the blade, failure-plane reaction at phi to its normal plus cohesion.
inline double wedge_oracle(double d, double rho, double w, const soil::SoilParams& s) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 201; ++i) {
    const double beta = i * (kPi / 2) / 202.0;
    const Vec2 tb(-std::cos(rho), std::sin(rho)), nb(std::sin(rho), std::cos(rho));
    const Vec2 tf(std::cos(beta), std::sin(beta)), nf(-std::sin(beta), std::cos(beta));
    const double weight = 0.5 * s.unit_weight * d * d * (1.0 / std::tan(rho) + 1.0 / std::tan(beta));
    const Vec2 ep = std::cos(s.metal_friction_angle) * nb - std::sin(s.metal_friction_angle) * tb;
    const Vec2 er = std::cos(s.friction_angle) * nf - std::sin(s.friction_angle) * tf;
    Eigen::Matrix2d a;
    a.col(0) = ep;
    a.col(1) = er;
    if (a.determinant() <= 0.0) continue;
    const Vec2 rhs = -(weight * Vec2(0, -1) + s.adhesion() * d / std::sin(rho) * (-tb) +
                       s.cohesion * d / std::sin(beta) * (-tf));
    const Vec2 x = a.partialPivLu().solve(rhs);
    best = std::min(best, w * x[0]);
  }
  return std::max(best, 0.0);
}

// Advantage as an explicit discounted sum of TD errors up to the episode cut.
inline learn::Matrix gae_oracle(const learn::Matrix& r, const learn::Matrix& v, const learn::Matrix& d,
                                const learn::Vector& last, double g, double l) {
  const int T = static_cast<int>(r.rows()), N = static_cast<int>(r.cols());
  learn::Matrix adv(T, N);
  for (int n = 0; n < N; ++n) {
    for (int t = 0; t < T; ++t) {
      double sum = 0.0, weight = 1.0;
      for (int k = t; k < T; ++k) {
        const double next_v = k + 1 < T ? v(k + 1, n) : last[n];
        const double delta = r(k, n) + g * next_v * (1.0 - d(k, n)) - v(k, n);
        sum += weight * delta;
        if (d(k, n) != 0.0) break;
        weight *= g * l;
      }
      adv(t, n) = sum;
    }
  }
  return adv;
}

inline double min_pairwise(const std::vector<Vec3>& pts, const std::vector<int>& s) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) m = std::min(m, (pts[s[i]] - pts[s[j]]).norm());
  return m;
}

/// Largest minimum pairwise distance over all k-subsets (exhaustive).
inline double best_maxmin(const std::vector<Vec3>& pts, int k) {
  const int n = static_cast<int>(pts.size());
  double best = -1.0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != k) continue;
    std::vector<int> s;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) s.push_back(i);
    best = std::max(best, min_pairwise(pts, s));
  }
  return best;
}

inline Pose pose_at(const Vec3& p, const Quat& q = Quat::Identity()) {
  Pose t = Pose::Identity();
  t.linear() = q.toRotationMatrix();
  t.translation() = p;
  return t;
}

inline std::shared_ptr<ConvexMesh> box_mesh(const Vec3& s) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) {
    pts.push_back(Vec3((i & 1) ? s.x() / 2 : -s.x() / 2, (i & 2) ? s.y() / 2 : -s.y() / 2,
                       (i & 4) ? s.z() / 2 : -s.z() / 2));
  }
  return std::make_shared<ConvexMesh>(convex_hull(pts));
}

inline physics::RockBody box_rock(const Vec3& s, double density = 2500.0) {
  physics::RockBody r;
  auto mesh = box_mesh(s);
  const MassProperties mp = mass_properties(*mesh, density);
  r.mesh = mesh;
  r.mass = mp.mass;
  r.inertia_body = mp.inertia;
  r.friction = 0.5;
  return r;
}

inline physics::RockBody irregular_rock(std::mt19937_64& rng) {
  std::vector<Vec3> pts;
  std::normal_distribution<double> g;
  for (int i = 0; i < 40; ++i) {
    Vec3 p(g(rng), g(rng), g(rng));
    pts.push_back(p.normalized().cwiseProduct(Vec3(0.4, 0.2, 0.3)));
  }
  auto mesh = std::make_shared<ConvexMesh>(convex_hull(pts));
  const MassProperties mp = mass_properties(*mesh, 2500.0);
  mesh->translate(-mp.com);
  physics::RockBody r;
  r.mesh = mesh;
  r.mass = mp.mass;
  r.inertia_body = mp.inertia;
  r.friction = std::uniform_real_distribution<double>(0.35, 0.6)(rng);
  return r;
}

/// Random convex rock for ray-casting checks.
inline std::shared_ptr<const ConvexMesh> random_mesh(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.2, 0.6);
  const Vec3 s(u(rng), u(rng), u(rng));
  std::vector<Vec3> pts;
  for (int i = 0; i < 50; ++i) pts.push_back(Vec3(g(rng), g(rng), g(rng)).normalized().cwiseProduct(s));
  return std::make_shared<const ConvexMesh>(convex_hull(pts));
}

}  // namespace boulder::oracle
