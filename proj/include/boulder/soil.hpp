#pragma once

#include "boulder/arm.hpp"
#include "boulder/common.hpp"

namespace boulder::soil {

struct SoilParams {
  double cohesion = 0.0;                    // c, Pa
  double friction_angle = 0.0;              // phi, rad
  double unit_weight = 19500.0;             // gamma, N/m^3
  double metal_friction_angle = 0.0;        // delta, rad
  double cavity_expansion = 1.0;            // CP
  double adhesion_ratio = 0.0;              // c_a / c
  /// Multiplier on the edge penetration term, randomized with the soil from Level 2 on.
  double cutting_resistance = 1.0;
  double surface_height = 0.0;

  double adhesion() const { return adhesion_ratio * cohesion; }
  /// Throws DomainError when a parameter is outside its physical range.
  void validate() const;
};

SoilParams soft_preset();
SoilParams hard_preset();
/// Componentwise linear blend, t = 0 gives `a`.
SoilParams interpolate(const SoilParams& a, const SoilParams& b, double t);

/// Rake angles below this are treated as this in the wedge model (a flat blade has no passive wedge).
inline constexpr double kMinRake = 0.17;
/// Number of trial failure-plane angles spread over (0, pi/2).
inline constexpr int kWedgeCandidates = 201;
/// Edge speeds below this produce no resistance.
inline constexpr double kQuasiStaticSpeed = 1e-4;

/// Bucket edge state in the vertical plane through the cabin's radial direction.
struct CutState {
  double depth = 0.0;
  double rake = 0.0;
  double width = 1.0;
  double edge_thickness = 0.03;
  /// (radial, vertical) edge velocity, m/s.
  Vec2 velocity = Vec2::Zero();
  /// Horizontal unit vector of the slice, base frame.
  Vec3 radial = Vec3::UnitX();
  /// Edge reference point, base frame.
  Vec3 edge = Vec3::Zero();
};

CutState excavation_slice(double q_turn, const Pose& bucket_base, const Vec3& edge_velocity,
                          const arm::BucketGeometry& bucket, double soil_height);

struct WedgeSolution {
  double n_gamma = 0.0;
  double n_c = 0.0;
  double n_a = 0.0;
  double failure_angle = 0.0;
  /// w (gamma d^2 N_gamma + c d N_c + c_a d N_a), N.
  double force = 0.0;
};

/// Passive wedge resistance minimized over trial failure-plane angles. depth >= 0; rake is used as
/// given (callers apply kMinRake).
WedgeSolution trial_wedge(double depth, double rake, double width, const SoilParams& soil);

struct SliceForce {
  /// (radial, vertical) force on the bucket, N.
  Vec2 force = Vec2::Zero();
  double cutting = 0.0;
  double penetration = 0.0;
  double failure_angle = 0.0;
};

/// Cutting resistance from the wedge plus edge penetration resistance, each opposing the
/// corresponding component of the edge velocity. Zero at zero depth or negligible speed.
SliceForce fee_resistance(const CutState& cut, const SoilParams& soil);

/// Penetration resistance CP (c + gamma d) w t, ramped in over the first edge thickness of depth.
double penetration_resistance(const CutState& cut, const SoilParams& soil);

struct SoilLoad {
  Vec3 force = Vec3::Zero();
  Vec3 point = Vec3::Zero();
  CutState cut;
  SliceForce slice;
};

/// Slice force lifted back to 3D in the base frame, applied at the edge.
SoilLoad apply_soil_force(double q_turn, const Pose& bucket_base, const Vec3& edge_velocity,
                          const arm::BucketGeometry& bucket, const SoilParams& soil);

}  // namespace boulder::soil
