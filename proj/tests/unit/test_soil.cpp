#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <random>

#include "boulder/soil.hpp"
#include "../support/oracles.hpp"

using namespace boulder;
using namespace boulder::soil;
using boulder::oracle::wedge_oracle;

namespace {

double deg(double d) { return d * kPi / 180.0; }

CutState cut_at(double d, double rho, double w = 1.0) {
  CutState c;
  c.depth = d;
  c.rake = rho;
  c.width = w;
  c.velocity = Vec2(-0.3, 0.0);
  return c;
}

}  // namespace

TEST_CASE("presets are valid") {
  CHECK_NOTHROW(soft_preset().validate());
  CHECK_NOTHROW(hard_preset().validate());
  CHECK(hard_preset().adhesion() == doctest::Approx(52500.0));
  SoilParams bad = soft_preset();
  bad.cavity_expansion = 0.5;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = soft_preset();
  bad.friction_angle = kPi / 2;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("zero depth gives zero force") {
  for (const auto& s : {soft_preset(), hard_preset()}) {
    const SliceForce f = fee_resistance(cut_at(0.0, deg(30)), s);
    CHECK(f.force.isZero());
    CHECK(f.cutting == 0.0);
    CHECK(f.penetration == 0.0);
  }
}

TEST_CASE("cohesionless soil keeps only the weight term") {
  const SoilParams s = soft_preset();
  const WedgeSolution sol = trial_wedge(0.2, deg(30), 1.0, s);
  CHECK(sol.force == doctest::Approx(s.unit_weight * 0.04 * sol.n_gamma).epsilon(1e-12));
}

TEST_CASE("wedge resistance matches the force-balance oracle") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 2000; ++n) {
    const SoilParams s = interpolate(soft_preset(), hard_preset(), u(rng));
    const double d = 0.01 + 0.5 * u(rng);
    const double rho = kMinRake + (1.4 - kMinRake) * u(rng);
    const double w = 0.5 + u(rng);
    const double expect = wedge_oracle(d, rho, w, s);
    const double got = trial_wedge(d, rho, w, s).force;
    REQUIRE(std::abs(got - expect) <= 1e-6 * std::abs(expect));
  }
}

TEST_CASE("hard soil resists more than soft soil at 0.2 m and 30 deg rake") {
  const double soft = trial_wedge(0.2, deg(30), 1.0, soft_preset()).force;
  const double hard = trial_wedge(0.2, deg(30), 1.0, hard_preset()).force;
  CHECK(hard > soft);
  CHECK(soft == doctest::Approx(wedge_oracle(0.2, deg(30), 1.0, soft_preset())).epsilon(1e-9));
  CHECK(hard == doctest::Approx(wedge_oracle(0.2, deg(30), 1.0, hard_preset())).epsilon(1e-9));
}

TEST_CASE("resistance is monotone in depth, cohesion and unit weight") {
  const SoilParams base = hard_preset();
  for (double rho : {deg(10), deg(30), deg(60)}) {
    for (int ic = 0; ic < 10; ++ic) {
      for (int ig = 0; ig < 10; ++ig) {
        double prev_h = -1.0, prev_v = -1.0;
        for (int id = 0; id < 10; ++id) {
          SoilParams s = base;
          s.cohesion = 12000.0 * ic;
          s.unit_weight = 15000.0 + 1000.0 * ig;
          CutState c = cut_at(0.04 * id, rho);
          c.velocity = Vec2(-0.3, -0.1);
          const SliceForce f = fee_resistance(c, s);
          CHECK(f.cutting >= prev_h);
          CHECK(f.penetration >= prev_v);
          prev_h = f.cutting;
          prev_v = f.penetration;
          if (ic > 0) {
            SoilParams lower = s;
            lower.cohesion = 12000.0 * (ic - 1);
            const SliceForce g = fee_resistance(c, lower);
            CHECK(f.cutting >= g.cutting);
            CHECK(f.penetration >= g.penetration);
          }
          if (ig > 0) {
            SoilParams lower = s;
            lower.unit_weight -= 1000.0;
            const SliceForce g = fee_resistance(c, lower);
            CHECK(f.cutting >= g.cutting);
            CHECK(f.penetration >= g.penetration);
          }
        }
      }
    }
  }
}

TEST_CASE("hard preset dominates soft preset at every positive depth") {
  for (double rho : {deg(5), deg(20), deg(45), deg(80)}) {
    for (int i = 1; i <= 400; ++i) {
      CutState c = cut_at(0.001 * i, rho, 1.4);
      c.velocity = Vec2(-0.3, -0.2);
      const SliceForce s = fee_resistance(c, soft_preset());
      const SliceForce h = fee_resistance(c, hard_preset());
      REQUIRE(h.cutting > s.cutting);
      REQUIRE(h.penetration > s.penetration);
    }
  }
}

TEST_CASE("force vanishes continuously at the surface") {
  for (const auto& s : {soft_preset(), hard_preset()}) {
    double prev = std::numeric_limits<double>::infinity();
    for (double d : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
      CutState c = cut_at(d, deg(30), 1.4);
      c.velocity = Vec2(-0.3, -0.3);
      const double mag = fee_resistance(c, s).force.norm();
      CHECK(mag < prev);
      prev = mag;
    }
    CHECK(prev < 1e-6 * fee_resistance([] {
                          CutState c = cut_at(0.2, deg(30), 1.4);
                          c.velocity = Vec2(-0.3, -0.3);
                          return c;
                        }(), s).force.norm() * 1e3);
  }
}

TEST_CASE("excavation slice matches a direct projection") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  arm::BucketGeometry bucket;
  for (int n = 0; n < 500; ++n) {
    const double q_turn = 1.5 * u(rng);
    Pose base = Pose::Identity();
    base.linear() = Eigen::AngleAxisd(kPi * u(rng), Vec3(u(rng), u(rng), u(rng)).normalized()).toRotationMatrix();
    base.translation() = Vec3(5 * u(rng), 5 * u(rng), u(rng));
    const Vec3 vel(u(rng), u(rng), u(rng));
    const CutState c = excavation_slice(q_turn, base, vel, bucket, 0.1);

    const Vec3 radial(std::cos(q_turn), std::sin(q_turn), 0.0);
    const Vec3 edge = base.translation() + base.linear() * Vec3(0, 0, -bucket.plate_thickness);
    CHECK(c.depth == doctest::Approx(std::max(0.0, 0.1 - edge.z())).epsilon(1e-12));
    CHECK(std::abs(c.velocity.x() - (vel.x() * radial.x() + vel.y() * radial.y())) < 1e-9);
    CHECK(std::abs(c.velocity.y() - vel.z()) < 1e-9);
    const Vec3 x = base.linear().col(0);
    const double in_plane = std::abs(x.x() * radial.x() + x.y() * radial.y());
    CHECK(std::abs(std::tan(c.rake) * in_plane - std::abs(x.z())) < 1e-9);
  }
}

TEST_CASE("edge exactly at the surface has zero depth; 0.2 m below has 0.2") {
  arm::BucketGeometry bucket;
  Pose base = Pose::Identity();
  base.translation() = Vec3(4, 0, bucket.plate_thickness);
  CHECK(excavation_slice(0.0, base, Vec3::Zero(), bucket, 0.0).depth == 0.0);
  base.translation().z() = bucket.plate_thickness - 0.2;
  CHECK(excavation_slice(0.0, base, Vec3::Zero(), bucket, 0.0).depth == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("3D soil force") {
  arm::BucketGeometry bucket;
  SUBCASE("bucket above soil") {
    Pose base = Pose::Identity();
    base.translation() = Vec3(4, 0, 1.0);
    CHECK(apply_soil_force(0.3, base, Vec3(-0.3, 0, -0.2), bucket, hard_preset()).force.isZero());
  }
  SUBCASE("pure radial drag has no lateral component") {
    const double q_turn = 0.7;
    Pose base = Pose::Identity();
    base.linear() = rot_z(q_turn) * rot_y(kPi + 0.3);
    base.translation() = Vec3(4 * std::cos(q_turn), 4 * std::sin(q_turn), -0.1);
    const Vec3 radial(std::cos(q_turn), std::sin(q_turn), 0);
    const SoilLoad load = apply_soil_force(q_turn, base, -0.4 * radial, bucket, soft_preset());
    const Vec3 lateral(-radial.y(), radial.x(), 0);
    CHECK(load.force.norm() > 0.0);
    CHECK(std::abs(load.force.dot(lateral)) < 1e-9 * load.force.norm());
  }
  SUBCASE("below-surface resistance never does positive work") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int n = 0; n < 10000; ++n) {
      const double q_turn = 1.5 * u(rng);
      Pose base = Pose::Identity();
      base.linear() = rot_z(q_turn) * rot_y(kPi + 1.2 * u(rng));
      base.translation() = Vec3(4 * u(rng), 4 * u(rng), 0.2 * u(rng));
      const Vec3 vel(u(rng), u(rng), u(rng));
      const SoilParams s = interpolate(soft_preset(), hard_preset(), 0.5 + 0.5 * u(rng));
      const SoilLoad load = apply_soil_force(q_turn, base, vel, bucket, s);
      REQUIRE(load.force.dot(vel) <= 1e-9 * load.force.norm());
    }
  }
  SUBCASE("negligible speed gives no force") {
    Pose base = Pose::Identity();
    base.translation() = Vec3(4, 0, -0.2);
    CHECK(apply_soil_force(0.0, base, Vec3(5e-5, 0, 0), bucket, hard_preset()).force.isZero());
  }
}
