#include "doctest.h"

#include <cmath>
#include <random>

#include "boulder/mesh.hpp"

using namespace boulder;

namespace {

std::vector<Vec3> box_points(const Vec3& size, const Vec3& offset = Vec3::Zero()) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) {
    pts.push_back(offset + Vec3((i & 1) ? size.x() / 2 : -size.x() / 2, (i & 2) ? size.y() / 2 : -size.y() / 2,
                                (i & 4) ? size.z() / 2 : -size.z() / 2));
  }
  return pts;
}

void check_closed_convex(const ConvexMesh& m) {
  const int v = static_cast<int>(m.vertices.size());
  const int f = static_cast<int>(m.faces.size());
  CHECK(v - m.edge_count() + f == 2);
  for (const auto& p : m.vertices) CHECK(m.max_plane_distance(p) <= 1e-9);
}

}  // namespace

TEST_CASE("hull of a tetrahedron") {
  const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  const ConvexMesh m = convex_hull(pts);
  CHECK(m.vertices.size() == 4);
  CHECK(m.faces.size() == 4);
  check_closed_convex(m);
  CHECK(mass_properties(m, 1.0).volume == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("hull of a cube with interior and face points") {
  std::vector<Vec3> pts = box_points(Vec3(1, 1, 1));
  pts.push_back(Vec3(0, 0, 0));
  pts.push_back(Vec3(0.1, -0.2, 0.3));
  pts.push_back(Vec3(0.5, 0.1, 0.2));  // on the +x face
  pts.push_back(Vec3(0.5, 0.5, 0.0));  // on an edge
  const ConvexMesh m = convex_hull(pts);
  check_closed_convex(m);
  for (const auto& p : pts) CHECK(m.max_plane_distance(p) <= 1e-9);
  CHECK(mass_properties(m, 1.0).volume == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cube mass properties match the closed form") {
  const ConvexMesh m = convex_hull(box_points(Vec3(1, 1, 1), Vec3(2, -1, 3)));
  const MassProperties mp = mass_properties(m, 2500.0);
  CHECK(mp.mass == doctest::Approx(2500.0).epsilon(1e-12));
  CHECK((mp.com - Vec3(2, -1, 3)).norm() < 1e-12);
  const double i = mp.mass / 6.0;
  CHECK((mp.inertia - i * Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("box mass properties match the closed form") {
  const Vec3 s(0.8, 0.3, 0.5);
  const ConvexMesh m = convex_hull(box_points(s));
  const MassProperties mp = mass_properties(m, 2500.0);
  const double mass = 2500.0 * s.prod();
  CHECK(mp.mass == doctest::Approx(mass).epsilon(1e-12));
  CHECK(mp.inertia(0, 0) == doctest::Approx(mass / 12 * (s.y() * s.y() + s.z() * s.z())).epsilon(1e-12));
  CHECK(mp.inertia(1, 1) == doctest::Approx(mass / 12 * (s.x() * s.x() + s.z() * s.z())).epsilon(1e-12));
  CHECK(mp.inertia(2, 2) == doctest::Approx(mass / 12 * (s.x() * s.x() + s.y() * s.y())).epsilon(1e-12));
  CHECK(std::abs(mp.inertia(0, 1)) < 1e-9);
}

TEST_CASE("random point clouds give closed convex hulls") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec3> pts;
    const int n = 10 + trial * 3;
    for (int i = 0; i < n; ++i) pts.push_back(Vec3(g(rng), g(rng), g(rng)));
    const ConvexMesh m = convex_hull(pts);
    check_closed_convex(m);
    for (const auto& p : pts) CHECK(m.max_plane_distance(p) <= 1e-9);
  }
}

TEST_CASE("degenerate inputs are rejected") {
  CHECK_THROWS_AS(convex_hull(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}), DomainError);
  CHECK_THROWS_AS(convex_hull(std::vector<Vec3>(6, Vec3(1, 2, 3))), DomainError);
  std::vector<Vec3> line;
  for (int i = 0; i < 6; ++i) line.push_back(Vec3(i, 2 * i, 0));
  CHECK_THROWS_AS(convex_hull(line), DomainError);
  std::vector<Vec3> plane;
  for (int i = 0; i < 6; ++i) plane.push_back(Vec3(i, i * i, 0));
  CHECK_THROWS_AS(convex_hull(plane), DomainError);
}
