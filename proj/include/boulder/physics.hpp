#pragma once

#include <memory>
#include <span>
#include <vector>

#include "boulder/arm.hpp"
#include "boulder/common.hpp"
#include "boulder/mesh.hpp"

namespace boulder::physics {

/// Rigid rock. The mesh lives in the body frame with the center of mass at the origin.
struct RockBody {
  std::shared_ptr<const ConvexMesh> mesh;
  double mass = 1.0;
  Mat3 inertia_body = Mat3::Identity();
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  double friction = 0.5;

  Mat3 rotation() const { return orientation.toRotationMatrix(); }
  Mat3 world_inertia_inverse() const;
  Vec3 world_vertex(std::size_t i) const { return position + orientation * mesh->vertices[i]; }
  double lowest_point() const;
  double kinetic_energy() const;
  bool finite() const;
  /// Throws DomainError unless mass > 0, inertia is positive definite and the mesh is convex.
  void validate() const;
};

/// Finite horizontal support surface the rock can rest on.
struct Ground {
  double height = 0.0;
  double x_min = -1e9, x_max = 1e9;
  double y_min = -1e9, y_max = 1e9;
  bool supports(const Vec3& p) const {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max;
  }
};

inline constexpr int kGroundPair = -1;

/// `normal` is the unit direction of the contact force on the rock; `pair` is kGroundPair or a
/// bucket PlateId. Speculative contacts (within the detection margin but not yet touching) carry a
/// positive `separation` and zero depth.
struct Contact {
  Vec3 point;
  Vec3 normal;
  double depth = 0.0;
  int pair = kGroundPair;
  double separation = 0.0;
};

using ContactSet = std::vector<Contact>;

/// Rock-vs-ground (one contact per penetrating vertex) and rock-vs-bucket-slab contacts.
/// Excavator links other than the bucket never collide. Features closer than `margin` are
/// reported as speculative contacts so the solver can stop them within the coming step.
ContactSet detect_contacts(const RockBody& rock, const Ground& ground, std::span<const arm::Plate> plates,
                           double margin = 0.0);

struct ContactParams {
  double stiffness = 1.0e5;
  /// Fraction of critical damping per contact effective mass.
  double damping_ratio = 1.0;
  int iterations = 12;
  double gravity = kGravity;
  /// Detection margin for speculative contacts, m.
  double margin = 0.02;
};

struct Wrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

struct ContactForce {
  Vec3 point;
  /// Force on the rock; the bucket receives the opposite.
  Vec3 force;
  double normal = 0.0;
  double tangential = 0.0;
  int pair = kGroundPair;
};

struct StepResult {
  RockBody rock;
  std::vector<ContactForce> forces;
  bool fault = false;
};

/// One substep: gravity and the external wrench, spring-damper normal forces evaluated at the
/// end-of-step penetration and the mid-step velocity (solved by projected Gauss-Seidel with a
/// Coulomb friction disk), then a mid-step-velocity position update. Plates act as kinematic
/// boundaries moving with their stored twist.
StepResult step_dynamics(const RockBody& rock, const ContactSet& contacts, std::span<const arm::Plate> plates,
                         const Wrench& external, double dt, const ContactParams& params);

/// Total mechanical energy relative to `reference_height`, including stored contact spring energy.
double mechanical_energy(const RockBody& rock, const ContactSet& contacts, double stiffness,
                         double reference_height, double gravity = kGravity);

/// True iff the center of mass lies inside the bucket's open box (boundary inclusive).
bool rock_in_shovel(const Vec3& rock_com, const arm::BucketGeometry& bucket, const Pose& bucket_base);

}  // namespace boulder::physics
