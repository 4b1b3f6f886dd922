#include "boulder/physics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace boulder::physics {

Mat3 RockBody::world_inertia_inverse() const {
  const Mat3 r = rotation();
  return r * inertia_body.inverse() * r.transpose();
}

double RockBody::lowest_point() const {
  double z = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mesh->vertices.size(); ++i) z = std::min(z, world_vertex(i).z());
  return z;
}

double RockBody::kinetic_energy() const {
  const Vec3 w_body = orientation.conjugate() * angular_velocity;
  return 0.5 * mass * linear_velocity.squaredNorm() + 0.5 * w_body.dot(inertia_body * w_body);
}

bool RockBody::finite() const {
  return all_finite(position) && all_finite(orientation.coeffs()) && all_finite(linear_velocity) &&
         all_finite(angular_velocity);
}

void RockBody::validate() const {
  if (!mesh || mesh->vertices.size() < 4 || mesh->faces.size() < 4) throw DomainError("rock: degenerate mesh");
  if (!(mass > 0.0)) throw DomainError("rock: mass must be positive");
  Eigen::SelfAdjointEigenSolver<Mat3> es(inertia_body);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw DomainError("rock: inertia not positive definite");
  const double tol = 1e-9 * std::max(1.0, mesh->bounding_radius());
  for (const auto& v : mesh->vertices) {
    if (mesh->max_plane_distance(v) > tol) throw DomainError("rock: mesh is not convex");
  }
}

namespace {

constexpr double kEdgeSampleSpacing = 0.05;

void add_vertex_plate_contacts(const RockBody& rock, const arm::Plate& plate, int pair, double margin,
                               ContactSet& out) {
  const Mat3 r = plate.frame.linear();
  const Mat3 rt = r.transpose();
  const Vec3 o = plate.frame.translation();
  const double t = plate.thickness;
  for (std::size_t i = 0; i < rock.mesh->vertices.size(); ++i) {
    const Vec3 w = rock.world_vertex(i);
    const Vec3 l = rt * (w - o);
    if (std::abs(l.x()) > plate.half_x || std::abs(l.y()) > plate.half_y) continue;
    if (l.z() > 0.0 || l.z() < -t) {
      if (l.z() > 0.0 && l.z() < margin) out.push_back({w, r.col(2), 0.0, pair, l.z()});
      if (l.z() < -t && l.z() > -t - margin) out.push_back({w, -r.col(2), 0.0, pair, -t - l.z()});
      continue;
    }

    // Cheapest way out of the slab, through either face or a free edge.
    double depth = -l.z();
    Vec3 dir = r.col(2);
    if (l.z() + t < depth) depth = l.z() + t, dir = -r.col(2);
    if ((plate.free_edges & arm::kEdgePosX) && plate.half_x - l.x() < depth) depth = plate.half_x - l.x(), dir = r.col(0);
    if ((plate.free_edges & arm::kEdgeNegX) && plate.half_x + l.x() < depth) depth = plate.half_x + l.x(), dir = -r.col(0);
    if ((plate.free_edges & arm::kEdgePosY) && plate.half_y - l.y() < depth) depth = plate.half_y - l.y(), dir = r.col(1);
    if ((plate.free_edges & arm::kEdgeNegY) && plate.half_y + l.y() < depth) depth = plate.half_y + l.y(), dir = -r.col(1);
    out.push_back({w, dir, std::max(depth, 0.0), pair});
  }
}

// Points along a free edge of the slab that ended up inside the rock push the rock out through
// its nearest face.
void add_edge_rock_contacts(const RockBody& rock, const arm::Plate& plate, int pair, double radius,
                            double margin, ContactSet& out) {
  const Mat3 rot = rock.rotation();
  const Mat3 rot_t = rot.transpose();
  const Vec3 x_axis = plate.frame.linear().col(0);
  const Vec3 y_axis = plate.frame.linear().col(1);
  const Vec3 z_axis = plate.frame.linear().col(2);
  const Vec3 o = plate.frame.translation();

  auto sample_edge = [&](const Vec3& mid, const Vec3& along, double half) {
    const int n = static_cast<int>(std::ceil(2.0 * half / kEdgeSampleSpacing)) + 1;
    for (int layer = 0; layer < 2; ++layer) {
      const Vec3 base = mid - (layer == 0 ? 0.0 : plate.thickness) * z_axis;
      for (int k = 0; k < n; ++k) {
        const Vec3 p = base + (-half + 2.0 * half * k / (n - 1)) * along;
        const Vec3 rel = p - rock.position;
        if (rel.squaredNorm() > (radius + margin) * (radius + margin)) continue;
        int face = -1;
        const double d = rock.mesh->max_plane_distance(rot_t * rel, &face);
        if (d >= margin) continue;
        const Vec3 n = -(rot * rock.mesh->normals[face]);
        if (d < 0.0) {
          out.push_back({p, n, -d, pair});
        } else {
          out.push_back({p, n, 0.0, pair, d});
        }
      }
    }
  };
  if (plate.free_edges & arm::kEdgePosX) sample_edge(o + plate.half_x * x_axis, y_axis, plate.half_y);
  if (plate.free_edges & arm::kEdgeNegX) sample_edge(o - plate.half_x * x_axis, y_axis, plate.half_y);
  if (plate.free_edges & arm::kEdgePosY) sample_edge(o + plate.half_y * y_axis, x_axis, plate.half_x);
  if (plate.free_edges & arm::kEdgeNegY) sample_edge(o - plate.half_y * y_axis, x_axis, plate.half_x);
}

}  // namespace

ContactSet detect_contacts(const RockBody& rock, const Ground& ground, std::span<const arm::Plate> plates,
                           double margin) {
  ContactSet contacts;
  for (std::size_t i = 0; i < rock.mesh->vertices.size(); ++i) {
    const Vec3 w = rock.world_vertex(i);
    if (!ground.supports(w)) continue;
    if (w.z() < ground.height) {
      contacts.push_back({w, Vec3::UnitZ(), ground.height - w.z(), kGroundPair});
    } else if (w.z() < ground.height + margin) {
      contacts.push_back({w, Vec3::UnitZ(), 0.0, kGroundPair, w.z() - ground.height});
    }
  }

  const double radius = rock.mesh->bounding_radius();
  for (std::size_t k = 0; k < plates.size(); ++k) {
    const auto& plate = plates[k];
    const Vec3 l = plate.frame.linear().transpose() * (rock.position - plate.frame.translation());
    const double dx = std::max(0.0, std::abs(l.x()) - plate.half_x);
    const double dy = std::max(0.0, std::abs(l.y()) - plate.half_y);
    const double dz = std::max({0.0, l.z(), -plate.thickness - l.z()});
    if (dx * dx + dy * dy + dz * dz > (radius + margin) * (radius + margin)) continue;
    add_vertex_plate_contacts(rock, plate, static_cast<int>(k), margin, contacts);
    add_edge_rock_contacts(rock, plate, static_cast<int>(k), radius, margin, contacts);
  }
  return contacts;
}

namespace {

struct SolverRow {
  Vec3 r;  // contact point relative to the center of mass
  Vec3 n;
  Vec3 t1, t2;
  Vec3 boundary_velocity;
  Vec3 rn, rt1, rt2;  // I^-1 (r x axis)
  double inv_n = 0, inv_t1 = 0, inv_t2 = 0;
  double gamma = 0;  // (h^2 k + h c) / 2
  double bias = 0;   // h k (depth - separation) - gamma u_n at the start of the step
  double impulse_n = 0;
  Eigen::Vector2d impulse_t = Eigen::Vector2d::Zero();
};

void tangent_basis(const Vec3& n, Vec3& t1, Vec3& t2) {
  const Vec3 a = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  t1 = n.cross(a).normalized();
  t2 = n.cross(t1);
}

}  // namespace

StepResult step_dynamics(const RockBody& rock, const ContactSet& contacts, std::span<const arm::Plate> plates,
                         const Wrench& external, double dt, const ContactParams& params) {
  StepResult result;
  result.rock = rock;
  RockBody& out = result.rock;
  const double h = dt;
  const double inv_m = 1.0 / rock.mass;
  const Mat3 inv_i = rock.world_inertia_inverse();
  const Vec3 gravity(0.0, 0.0, -params.gravity);

  Vec3 v = rock.linear_velocity + h * (gravity + inv_m * external.force);
  Vec3 w = rock.angular_velocity + h * (inv_i * external.torque);

  std::vector<SolverRow> rows(contacts.size());
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    const Contact& c = contacts[i];
    SolverRow& row = rows[i];
    row.r = c.point - rock.position;
    row.n = c.normal;
    tangent_basis(row.n, row.t1, row.t2);
    if (c.pair >= 0 && c.pair < static_cast<int>(plates.size())) {
      row.boundary_velocity = plates[c.pair].velocity_at(c.point);
    } else {
      row.boundary_velocity.setZero();
    }
    const Vec3 cn = row.r.cross(row.n), c1 = row.r.cross(row.t1), c2 = row.r.cross(row.t2);
    row.rn = inv_i * cn;
    row.rt1 = inv_i * c1;
    row.rt2 = inv_i * c2;
    row.inv_n = inv_m + cn.dot(row.rn);
    row.inv_t1 = inv_m + c1.dot(row.rt1);
    row.inv_t2 = inv_m + c2.dot(row.rt2);
    const double m_eff = 1.0 / row.inv_n;
    const double damping = 2.0 * params.damping_ratio * std::sqrt(params.stiffness * m_eff);
    row.gamma = 0.5 * (h * h * params.stiffness + h * damping);
    const double u0 = (rock.linear_velocity + rock.angular_velocity.cross(row.r) - row.boundary_velocity).dot(row.n);
    row.bias = h * params.stiffness * (c.depth - c.separation) - row.gamma * u0;
  }

  auto relative_velocity = [&](const SolverRow& row) -> Vec3 { return v + w.cross(row.r) - row.boundary_velocity; };
  auto apply = [&](const Vec3& dir, const Vec3& ang, double p) {
    v += (p * inv_m) * dir;
    w += p * ang;
  };

  for (int it = 0; it < params.iterations; ++it) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      SolverRow& row = rows[i];
      const double u = relative_velocity(row).dot(row.n);
      const double residual = row.bias - row.gamma * u - row.impulse_n;
      const double updated = std::max(0.0, row.impulse_n + residual / (1.0 + row.gamma * row.inv_n));
      apply(row.n, row.rn, updated - row.impulse_n);
      row.impulse_n = updated;

      const Vec3 ut = relative_velocity(row);
      Eigen::Vector2d target = row.impulse_t;
      target.x() -= ut.dot(row.t1) / row.inv_t1;
      target.y() -= ut.dot(row.t2) / row.inv_t2;
      const double limit = rock.friction * row.impulse_n;
      const double norm = target.norm();
      if (norm > limit) target *= limit / norm;
      const Eigen::Vector2d delta = target - row.impulse_t;
      apply(row.t1, row.rt1, delta.x());
      apply(row.t2, row.rt2, delta.y());
      row.impulse_t = target;
    }
  }

  out.position = rock.position + 0.5 * h * (rock.linear_velocity + v);
  const Vec3 w_avg = 0.5 * (rock.angular_velocity + w);
  const double angle = w_avg.norm() * h;
  if (angle > 0.0) {
    out.orientation = Quat(Eigen::AngleAxisd(angle, w_avg.normalized())) * rock.orientation;
    out.orientation.normalize();
  }
  out.linear_velocity = v;
  out.angular_velocity = w;

  result.forces.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const SolverRow& row = rows[i];
    ContactForce f;
    f.point = contacts[i].point;
    const Vec3 tangential = row.impulse_t.x() * row.t1 + row.impulse_t.y() * row.t2;
    f.force = (row.impulse_n * row.n + tangential) / h;
    f.normal = row.impulse_n / h;
    f.tangential = row.impulse_t.norm() / h;
    f.pair = contacts[i].pair;
    result.forces.push_back(f);
  }
  result.fault = !out.finite();
  return result;
}

double mechanical_energy(const RockBody& rock, const ContactSet& contacts, double stiffness,
                         double reference_height, double gravity) {
  double e = rock.kinetic_energy() + rock.mass * gravity * (rock.position.z() - reference_height);
  for (const auto& c : contacts) e += 0.5 * stiffness * c.depth * c.depth;
  return e;
}

bool rock_in_shovel(const Vec3& rock_com, const arm::BucketGeometry& bucket, const Pose& bucket_base) {
  return bucket.contains(bucket_base.inverse() * rock_com);
}

}  // namespace boulder::physics
