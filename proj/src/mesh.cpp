#include "boulder/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <utility>

namespace boulder {

void ConvexMesh::update_planes() {
  normals.resize(faces.size());
  offsets.resize(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Vec3& a = vertices[faces[f][0]];
    const Vec3& b = vertices[faces[f][1]];
    const Vec3& c = vertices[faces[f][2]];
    normals[f] = (b - a).cross(c - a).normalized();
    offsets[f] = normals[f].dot(a);
  }
}

double ConvexMesh::bounding_radius() const {
  double r = 0.0;
  for (const auto& v : vertices) r = std::max(r, v.norm());
  return r;
}

double ConvexMesh::max_plane_distance(const Vec3& p, int* face) const {
  double best = -std::numeric_limits<double>::infinity();
  int arg = -1;
  for (std::size_t f = 0; f < normals.size(); ++f) {
    const double d = normals[f].dot(p) - offsets[f];
    if (d > best) {
      best = d;
      arg = static_cast<int>(f);
    }
  }
  if (face) *face = arg;
  return best;
}

int ConvexMesh::edge_count() const {
  std::set<std::pair<int, int>> edges;
  for (const auto& t : faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      edges.emplace(std::min(a, b), std::max(a, b));
    }
  }
  return static_cast<int>(edges.size());
}

void ConvexMesh::translate(const Vec3& d) {
  for (auto& v : vertices) v += d;
  update_planes();
}

void ConvexMesh::scale(const Vec3& s) {
  for (auto& v : vertices) v = v.cwiseProduct(s);
  update_planes();
}

ConvexMesh convex_hull(std::span<const Vec3> points) {
  const int n = static_cast<int>(points.size());
  if (n < 4) throw DomainError("convex_hull: need at least four points");

  Eigen::AlignedBox3d box;
  for (const auto& p : points) box.extend(p);
  const double eps = 1e-10 * std::max(1.0, box.diagonal().norm());

  // Initial tetrahedron from extreme points.
  int i0 = 0, i1 = -1, i2 = -1, i3 = -1;
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = (points[i] - points[i0]).norm();
    if (d > best) best = d, i1 = i;
  }
  if (i1 < 0 || best <= eps) throw DomainError("convex_hull: coincident points");
  best = 0.0;
  const Vec3 dir = (points[i1] - points[i0]).normalized();
  for (int i = 0; i < n; ++i) {
    const Vec3 v = points[i] - points[i0];
    const double d = (v - v.dot(dir) * dir).norm();
    if (d > best) best = d, i2 = i;
  }
  if (i2 < 0 || best <= eps) throw DomainError("convex_hull: collinear points");
  best = 0.0;
  const Vec3 nrm = (points[i1] - points[i0]).cross(points[i2] - points[i0]).normalized();
  for (int i = 0; i < n; ++i) {
    const double d = std::abs(nrm.dot(points[i] - points[i0]));
    if (d > best) best = d, i3 = i;
  }
  if (i3 < 0 || best <= eps) throw DomainError("convex_hull: coplanar points");

  struct Face {
    Triangle v;
    Vec3 n;
    double off;
    bool alive;
  };
  std::vector<Face> faces;
  const Vec3 interior = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
  auto add_face = [&](int a, int b, int c) {
    Vec3 fn = (points[b] - points[a]).cross(points[c] - points[a]);
    if (fn.dot(points[a] - interior) < 0.0) {
      std::swap(b, c);
      fn = -fn;
    }
    fn.normalize();
    faces.push_back({{a, b, c}, fn, fn.dot(points[a]), true});
  };
  add_face(i0, i1, i2);
  add_face(i0, i1, i3);
  add_face(i0, i2, i3);
  add_face(i1, i2, i3);

  std::vector<int> visible;
  for (int p = 0; p < n; ++p) {
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    visible.clear();
    for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
      if (faces[f].alive && faces[f].n.dot(points[p]) - faces[f].off > eps) visible.push_back(f);
    }
    if (visible.empty()) continue;

    std::set<std::pair<int, int>> directed;
    for (int f : visible) {
      const auto& t = faces[f].v;
      for (int k = 0; k < 3; ++k) directed.emplace(t[k], t[(k + 1) % 3]);
    }
    std::vector<std::pair<int, int>> horizon;
    for (const auto& e : directed) {
      if (!directed.count({e.second, e.first})) horizon.push_back(e);
    }
    for (int f : visible) faces[f].alive = false;
    for (const auto& [a, b] : horizon) {
      Vec3 fn = (points[b] - points[a]).cross(points[p] - points[a]);
      fn.normalize();
      faces.push_back({{a, b, p}, fn, fn.dot(points[a]), true});
    }
  }

  // Compact to the vertices actually referenced.
  std::vector<int> remap(n, -1);
  ConvexMesh mesh;
  for (const auto& f : faces) {
    if (!f.alive) continue;
    Triangle t;
    for (int k = 0; k < 3; ++k) {
      int& r = remap[f.v[k]];
      if (r < 0) {
        r = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(points[f.v[k]]);
      }
      t[k] = r;
    }
    mesh.faces.push_back(t);
  }
  mesh.update_planes();
  return mesh;
}

MassProperties mass_properties(const ConvexMesh& mesh, double density) {
  if (mesh.vertices.empty() || mesh.faces.empty()) throw DomainError("mass_properties: empty mesh");
  Mat3 canonical;
  canonical << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  canonical /= 120.0;

  const Vec3 ref = mesh.vertices.front();
  double volume = 0.0;
  Vec3 first = Vec3::Zero();
  Mat3 second = Mat3::Zero();
  for (const auto& t : mesh.faces) {
    Mat3 a;
    a.col(0) = mesh.vertices[t[0]] - ref;
    a.col(1) = mesh.vertices[t[1]] - ref;
    a.col(2) = mesh.vertices[t[2]] - ref;
    const double det = a.determinant();
    volume += det / 6.0;
    first += det / 24.0 * (a.col(0) + a.col(1) + a.col(2));
    second += det * a * canonical * a.transpose();
  }
  if (!(volume > 0.0)) throw DomainError("mass_properties: non-positive volume");

  MassProperties mp;
  mp.volume = volume;
  mp.mass = density * volume;
  const Vec3 c = first / volume;
  mp.com = ref + c;
  const Mat3 central = second - volume * c * c.transpose();
  mp.inertia = density * (central.trace() * Mat3::Identity() - central);
  return mp;
}

}  // namespace boulder
