#include "boulder/soil.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace boulder::soil {

namespace {
double deg(double d) { return d * kPi / 180.0; }
double cot(double x) { return std::cos(x) / std::sin(x); }
}  // namespace

void SoilParams::validate() const {
  if (!(cohesion >= 0.0)) throw DomainError("soil: cohesion must be >= 0");
  if (!(friction_angle > 0.0 && friction_angle < kPi / 2)) throw DomainError("soil: friction angle outside (0, pi/2)");
  if (!(unit_weight > 0.0)) throw DomainError("soil: unit weight must be positive");
  if (!(metal_friction_angle >= 0.0 && metal_friction_angle < kPi / 2)) {
    throw DomainError("soil: soil-metal friction angle outside [0, pi/2)");
  }
  if (!(cavity_expansion >= 1.0)) throw DomainError("soil: cavity expansion factor must be >= 1");
  if (!(adhesion_ratio >= 0.0 && adhesion_ratio <= 1.0)) throw DomainError("soil: adhesion ratio outside [0, 1]");
  if (!(cutting_resistance > 0.0)) throw DomainError("soil: cutting resistance multiplier must be positive");
}

SoilParams soft_preset() {
  SoilParams s;
  s.cohesion = 0.0;
  s.friction_angle = deg(31.5);
  s.unit_weight = 19500.0;
  s.metal_friction_angle = deg(23.0);
  s.cavity_expansion = 1.0;
  s.adhesion_ratio = 0.0;
  return s;
}

SoilParams hard_preset() {
  SoilParams s;
  s.cohesion = 105000.0;
  s.friction_angle = deg(32.0);
  s.unit_weight = 21000.0;
  s.metal_friction_angle = deg(23.0);
  s.cavity_expansion = 300.0;
  s.adhesion_ratio = 0.5;
  return s;
}

SoilParams interpolate(const SoilParams& a, const SoilParams& b, double t) {
  auto mix = [t](double x, double y) { return x + t * (y - x); };
  SoilParams s;
  s.cohesion = mix(a.cohesion, b.cohesion);
  s.friction_angle = mix(a.friction_angle, b.friction_angle);
  s.unit_weight = mix(a.unit_weight, b.unit_weight);
  s.metal_friction_angle = mix(a.metal_friction_angle, b.metal_friction_angle);
  s.cavity_expansion = mix(a.cavity_expansion, b.cavity_expansion);
  s.adhesion_ratio = mix(a.adhesion_ratio, b.adhesion_ratio);
  s.cutting_resistance = mix(a.cutting_resistance, b.cutting_resistance);
  s.surface_height = mix(a.surface_height, b.surface_height);
  return s;
}

CutState excavation_slice(double q_turn, const Pose& bucket_base, const Vec3& edge_velocity,
                          const arm::BucketGeometry& bucket, double soil_height) {
  CutState cut;
  cut.radial = Vec3(std::cos(q_turn), std::sin(q_turn), 0.0);
  cut.edge = bucket_base * bucket.edge_point();
  cut.depth = std::max(0.0, soil_height - cut.edge.z());
  const Vec3 plate_dir = bucket_base.linear().col(0);
  cut.rake = std::atan2(std::abs(plate_dir.z()), std::abs(plate_dir.dot(cut.radial)));
  cut.width = bucket.width;
  cut.edge_thickness = bucket.edge_thickness;
  cut.velocity = Vec2(edge_velocity.dot(cut.radial), edge_velocity.z());
  return cut;
}

WedgeSolution trial_wedge(double depth, double rake, double width, const SoilParams& soil) {
  WedgeSolution best;
  best.force = std::numeric_limits<double>::infinity();
  const double phi = soil.friction_angle;
  const double rd = rake + soil.metal_friction_angle;
  const double ca = soil.adhesion();
  for (int i = 1; i <= kWedgeCandidates; ++i) {
    const double beta = i * (kPi / 2) / (kWedgeCandidates + 1);
    const double denom = std::cos(rd) + std::sin(rd) * cot(beta + phi);
    if (denom <= 0.0) continue;
    const double ng = (cot(rake) + cot(beta)) / (2.0 * denom);
    const double nc = (1.0 + cot(beta) * cot(beta + phi)) / denom;
    const double na = (1.0 - cot(rake) * cot(beta + phi)) / denom;
    const double p = width * (soil.unit_weight * depth * depth * ng + soil.cohesion * depth * nc + ca * depth * na);
    if (p < best.force) best = {ng, nc, na, beta, p};
  }
  if (!std::isfinite(best.force)) best.force = 0.0;
  best.force = std::max(best.force, 0.0);
  return best;
}

double penetration_resistance(const CutState& cut, const SoilParams& soil) {
  if (cut.depth <= 0.0) return 0.0;
  const double ramp = std::min(1.0, cut.depth / cut.edge_thickness);
  return soil.cutting_resistance * soil.cavity_expansion * (soil.cohesion + soil.unit_weight * cut.depth) *
         cut.width * cut.edge_thickness * ramp;
}

SliceForce fee_resistance(const CutState& cut, const SoilParams& soil) {
  SliceForce out;
  const double speed = cut.velocity.norm();
  if (cut.depth <= 0.0 || speed < kQuasiStaticSpeed) return out;
  const WedgeSolution wedge = trial_wedge(cut.depth, std::max(cut.rake, kMinRake), cut.width, soil);
  out.cutting = wedge.force;
  out.failure_angle = wedge.failure_angle;
  out.penetration = penetration_resistance(cut, soil);
  const Vec2 dir = cut.velocity / speed;
  out.force.x() = -out.cutting * dir.x();
  out.force.y() = dir.y() < 0.0 ? -out.penetration * dir.y() : 0.0;
  return out;
}

SoilLoad apply_soil_force(double q_turn, const Pose& bucket_base, const Vec3& edge_velocity,
                          const arm::BucketGeometry& bucket, const SoilParams& soil) {
  SoilLoad load;
  load.cut = excavation_slice(q_turn, bucket_base, edge_velocity, bucket, soil.surface_height);
  load.slice = fee_resistance(load.cut, soil);
  load.force = load.slice.force.x() * load.cut.radial + load.slice.force.y() * Vec3::UnitZ();
  load.point = load.cut.edge;
  return load;
}

}  // namespace boulder::soil
