#pragma once

#include <array>
#include <span>
#include <vector>

#include "boulder/common.hpp"

namespace boulder {

using Triangle = std::array<int, 3>;

/// Closed convex triangle mesh with outward face planes n·x = offset.
struct ConvexMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> faces;
  std::vector<Vec3> normals;
  std::vector<double> offsets;

  /// Recomputes face planes from vertices and faces.
  void update_planes();
  /// Largest vertex distance from the origin.
  double bounding_radius() const;
  /// Signed distance of p to the face plane with the largest value (positive outside).
  double max_plane_distance(const Vec3& p, int* face = nullptr) const;
  int edge_count() const;
  void translate(const Vec3& d);
  void scale(const Vec3& s);
};

/// 3D convex hull. Throws DomainError when fewer than four non-coplanar points exist.
ConvexMesh convex_hull(std::span<const Vec3> points);

struct MassProperties {
  double volume = 0.0;
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  /// Inertia about the center of mass, mesh axes.
  Mat3 inertia = Mat3::Zero();
};

/// Exact mass properties of a closed mesh of uniform density via signed tetrahedra.
MassProperties mass_properties(const ConvexMesh& mesh, double density);

}  // namespace boulder
