#include "doctest.h"

#include <cmath>
#include <memory>
#include <random>

#include "boulder/physics.hpp"
#include "../support/oracles.hpp"

using namespace boulder;
using namespace boulder::physics;
using boulder::oracle::box_rock;
using boulder::oracle::irregular_rock;

namespace {

RockBody simulate(RockBody rock, const Ground& ground, std::span<const arm::Plate> plates, int substeps,
                  double dt = 1.0 / 120.0) {
  ContactParams params;
  for (int i = 0; i < substeps; ++i) {
    const ContactSet c = detect_contacts(rock, ground, plates, params.margin);
    rock = step_dynamics(rock, c, plates, {}, dt, params).rock;
  }
  return rock;
}

}  // namespace

TEST_CASE("rock far above the ground has no contacts") {
  RockBody r = box_rock(Vec3(1, 1, 1));
  r.position = Vec3(0, 0, 3);
  CHECK(detect_contacts(r, Ground{}, {}).empty());
}

TEST_CASE("unit cube sunk by 0.1 yields four ground contacts") {
  RockBody r = box_rock(Vec3(1, 1, 1));
  r.position = Vec3(0, 0, 0.4);
  const ContactSet c = detect_contacts(r, Ground{}, {});
  REQUIRE(c.size() == 4);
  for (const auto& k : c) {
    CHECK(k.depth == doctest::Approx(0.1).epsilon(1e-12));
    CHECK((k.normal - Vec3::UnitZ()).norm() < 1e-15);
    CHECK(k.pair == kGroundPair);
  }
}

TEST_CASE("finite platform only supports points above it") {
  RockBody r = box_rock(Vec3(1, 1, 1));
  r.position = Vec3(0, 0, 0.4);
  Ground g;
  g.x_min = 0.0;
  CHECK(detect_contacts(r, g, {}).size() == 2);
}

TEST_CASE("rock resting on the bucket bottom plate touches only the bucket") {
  arm::BucketGeometry bucket;
  Pose base = Pose::Identity();
  base.translation() = Vec3(5, 0, 2);
  const arm::BucketPlates plates = arm::world_plates(bucket, base);
  RockBody r = box_rock(Vec3(0.4, 0.4, 0.4));
  r.position = base * Vec3(-0.6, 0.0, 0.19);
  const ContactSet c = detect_contacts(r, Ground{}, plates);
  int bottom = 0;
  for (const auto& k : c) {
    CHECK(k.pair != kGroundPair);
    if (k.pair == arm::kBottomPlate) {
      ++bottom;
      // Halfspace oracle: the contact point lies below the interior surface and above the underside.
      CHECK(k.point.z() <= 2.0);
      CHECK(k.point.z() >= 2.0 - bucket.plate_thickness);
      CHECK((k.normal - Vec3::UnitZ()).norm() < 1e-12);
      CHECK(k.depth == doctest::Approx(0.01).epsilon(1e-9));
    }
  }
  CHECK(bottom >= 3);
}

TEST_CASE("plate edge pushing into a rock face produces a contact through the nearest face") {
  arm::BucketGeometry bucket;
  Pose base = Pose::Identity();
  base.translation() = Vec3(5, 0, 0.03);
  const arm::BucketPlates plates = arm::world_plates(bucket, base);
  RockBody r = box_rock(Vec3(1.0, 2.0, 1.0));
  // Rock face at x = 0.02 ahead of the bucket edge at x = 5, overlapping by 0.02 m.
  r.position = Vec3(5.0 + 0.5 - 0.02, 0.0, 0.5);
  bool found = false;
  for (const auto& k : detect_contacts(r, Ground{.height = -5.0}, plates)) {
    if (k.pair != arm::kBottomPlate) continue;
    found = true;
    CHECK((k.normal - Vec3::UnitX()).norm() < 1e-12);
    CHECK(k.depth == doctest::Approx(0.02).epsilon(1e-9));
  }
  CHECK(found);
}

TEST_CASE("rock at rest stays at rest") {
  RockBody r = box_rock(Vec3(0.6, 0.5, 0.4));
  ContactParams params;
  r.position = Vec3(0, 0, 0.2 - r.mass * kGravity / (4 * params.stiffness));
  const Vec3 start = r.position;
  r = simulate(r, Ground{}, {}, 100 * 20);
  CHECK((r.position - start).norm() < 1e-4);
  CHECK(r.linear_velocity.norm() < 1e-4);
}

TEST_CASE("free fall follows the closed form until impact") {
  RockBody r = box_rock(Vec3(0.4, 0.4, 0.4));
  r.position = Vec3(0, 0, 1.0 + 0.2);
  const double dt = 1.0 / 120.0;
  ContactParams params;
  for (int i = 1; i < 200; ++i) {
    const ContactSet c = detect_contacts(r, Ground{}, {});
    if (!c.empty()) break;
    r = step_dynamics(r, c, {}, {}, dt, params).rock;
    const double t = i * dt;
    const double drop_exact = 0.5 * kGravity * t * t;
    const double drop = 1.2 - r.position.z();
    CHECK(std::abs(drop - drop_exact) <= 0.01 * std::max(drop_exact, 1e-3));
  }
}

TEST_CASE("sliding rock decelerates at mu g") {
  RockBody r = box_rock(Vec3(0.6, 0.6, 0.4));
  ContactParams params;
  r.friction = 0.5;
  r.position = Vec3(0, 0, 0.2 - r.mass * kGravity / (4 * params.stiffness));
  r.linear_velocity = Vec3(1.0, 0, 0);
  const double dt = 1.0 / 120.0;
  r = simulate(r, Ground{}, {}, 6, dt);
  const double v0 = r.linear_velocity.x();
  r = simulate(r, Ground{}, {}, 12, dt);
  const double decel = (v0 - r.linear_velocity.x()) / (12 * dt);
  CHECK(decel == doctest::Approx(0.5 * kGravity).epsilon(0.05));
}

TEST_CASE("contact forces never pull and respect the friction cone") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  arm::BucketGeometry bucket;
  ContactParams params;
  int checked = 0;
  for (int n = 0; n < 10000; ++n) {
    RockBody r = n % 2 ? box_rock(Vec3(0.5, 0.3, 0.4)) : irregular_rock(rng);
    Pose base = Pose::Identity();
    base.linear() = Eigen::AngleAxisd(0.3 * u(rng), Vec3::UnitY()).toRotationMatrix();
    base.translation() = Vec3(0.3 * u(rng), 0.3 * u(rng), 0.1 + 0.1 * u(rng));
    arm::BucketPlates plates = arm::world_plates(bucket, base);
    const Vec3 lin(u(rng), u(rng), u(rng)), ang(0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng));
    for (auto& p : plates) {
      p.linear_velocity = lin + ang.cross(p.center() - base.translation());
      p.angular_velocity = ang;
    }
    r.position = Vec3(-0.6 + 0.8 * u(rng), 0.5 * u(rng), 0.25 + 0.2 * u(rng));
    r.orientation = Quat(Eigen::AngleAxisd(kPi * u(rng), Vec3(u(rng), u(rng), u(rng) + 2).normalized()));
    r.linear_velocity = Vec3(u(rng), u(rng), u(rng));
    r.angular_velocity = Vec3(u(rng), u(rng), u(rng));
    const ContactSet c = detect_contacts(r, Ground{}, plates, params.margin);
    const StepResult s = step_dynamics(r, c, plates, {}, 1.0 / 120.0, params);
    REQUIRE(!s.fault);
    for (const auto& f : s.forces) {
      ++checked;
      REQUIRE(f.normal >= 0.0);
      REQUIRE(f.tangential <= r.friction * f.normal + 1e-9);
    }
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(c[i].depth >= 0.0);
      CHECK(c[i].separation >= 0.0);
      CHECK(std::abs(c[i].normal.norm() - 1.0) < 1e-12);
      CHECK(s.forces[i].force.dot(c[i].normal) >= -1e-9);
    }
  }
  CHECK(checked > 10000);
}

TEST_CASE("mechanical energy does not increase without external input") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ContactParams params;
  const double ref = -1.0;
  for (int n = 0; n < 300; ++n) {
    RockBody r = irregular_rock(rng);
    r.position = Vec3(0, 0, 0.3 + 0.3 * u(rng));
    r.orientation = Quat(Eigen::AngleAxisd(kPi * u(rng), Vec3(u(rng), u(rng), 2).normalized()));
    r.linear_velocity = Vec3(u(rng), u(rng), u(rng));
    r.angular_velocity = Vec3(u(rng), u(rng), u(rng));
    for (int k = 0; k < 60; ++k) {
      const ContactSet c = detect_contacts(r, Ground{}, {}, params.margin);
      const double e0 = mechanical_energy(r, c, params.stiffness, ref);
      r = step_dynamics(r, c, {}, {}, 1.0 / 120.0, params).rock;
      const double e1 = mechanical_energy(r, detect_contacts(r, Ground{}, {}, params.margin), params.stiffness, ref);
      REQUIRE(e1 <= e0 + 1e-6 * std::abs(e0));
    }
  }
}

TEST_CASE("stepping is deterministic") {
  std::mt19937_64 rng(2);
  RockBody a = irregular_rock(rng);
  a.position = Vec3(0.1, 0.2, 0.5);
  a.angular_velocity = Vec3(0.3, -1.0, 0.2);
  const RockBody x = simulate(a, Ground{}, {}, 300);
  const RockBody y = simulate(a, Ground{}, {}, 300);
  CHECK(x.position == y.position);
  CHECK(x.orientation.coeffs() == y.orientation.coeffs());
}

TEST_CASE("moving bucket pushes a resting rock") {
  arm::BucketGeometry bucket;
  Pose base = Pose::Identity();
  base.translation() = Vec3(0.0, 0, 0.03);
  arm::BucketPlates plates = arm::world_plates(bucket, base);
  for (auto& p : plates) p.linear_velocity = Vec3(0.3, 0, 0);
  RockBody r = box_rock(Vec3(0.4, 0.4, 0.4));
  ContactParams params;
  r.position = Vec3(0.21, 0.0, 0.2 - r.mass * kGravity / (4 * params.stiffness));
  const double dt = 1.0 / 120.0;
  for (int i = 0; i < 60; ++i) {
    r = step_dynamics(r, detect_contacts(r, Ground{}, plates, params.margin), plates, {}, dt, params).rock;
    for (auto& p : plates) p.frame.translation() += dt * p.linear_velocity;
  }
  CHECK(r.position.x() > 0.3);
}

TEST_CASE("rock in shovel uses the bucket box with inclusive boundary") {
  arm::BucketGeometry bucket;
  Pose base = Pose::Identity();
  base.linear() = rot_z(0.4);
  base.translation() = Vec3(5, 1, 0.5);
  CHECK(rock_in_shovel(base * Vec3(-0.6, 0.0, 0.45), bucket, base));
  CHECK_FALSE(rock_in_shovel(base * Vec3(-0.6, 0.0, 2.45), bucket, base));
  CHECK(rock_in_shovel(base * Vec3(-0.6, 0.3, 0.0), bucket, base));
  CHECK_FALSE(rock_in_shovel(base * Vec3(0.1, 0.0, 0.3), bucket, base));
}
