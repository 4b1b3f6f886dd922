#include "boulder/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace boulder::sensor {

namespace {

constexpr int kLeafSize = 4;

bool ray_box(const Ray& ray, const Vec3& inv_dir, const Eigen::AlignedBox3d& box, double t_max) {
  double t0 = 0.0, t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    double ta = (box.min()[a] - ray.origin[a]) * inv_dir[a];
    double tb = (box.max()[a] - ray.origin[a]) * inv_dir[a];
    if (ta > tb) std::swap(ta, tb);
    // NaN from 0 * inf means the ray lies on a slab boundary; treat as inside.
    if (!std::isnan(ta)) t0 = std::max(t0, ta);
    if (!std::isnan(tb)) t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

/// Ray against the slab [-hx,hx] x [-hy,hy] x [-T,0] of a plate. Returns the entry distance.
std::optional<double> ray_plate(const Ray& ray, const arm::Plate& plate) {
  const Mat3 rt = plate.frame.linear().transpose();
  const Vec3 o = rt * (ray.origin - plate.center());
  const Vec3 d = rt * ray.direction;
  const Vec3 lo(-plate.half_x, -plate.half_y, -plate.thickness);
  const Vec3 hi(plate.half_x, plate.half_y, 0.0);
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a];
    double tb = (hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  if (t1 <= 0.0) return std::nullopt;
  return t0 > 0.0 ? t0 : 0.0;
}

double min_pairwise(std::span<const Vec3> points, std::span<const int> subset) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < subset.size(); ++i)
    for (std::size_t j = i + 1; j < subset.size(); ++j)
      best = std::min(best, (points[subset[i]] - points[subset[j]]).squaredNorm());
  return best;
}

long binomial(int n, int k, long cap) {
  k = std::min(k, n - k);
  long r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > cap) return cap + 1;
  }
  return r;
}

int closest_index(std::span<const Vec3> points, const Vec3& reference) {
  int arg = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = (points[i] - reference).squaredNorm();
    if (d < best) best = d, arg = static_cast<int>(i);
  }
  return arg;
}

/// Greedy farthest-point order restricted to `pool`, starting at `start`.
std::vector<int> greedy_order(std::span<const Vec3> points, std::vector<int> pool, int start, int k) {
  std::vector<int> out{start};
  std::erase(pool, start);
  std::vector<double> dist(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) dist[i] = (points[pool[i]] - points[start]).squaredNorm();
  while (static_cast<int>(out.size()) < k && !pool.empty()) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < pool.size(); ++i)
      if (dist[i] > dist[arg]) arg = i;
    const int pick = pool[arg];
    out.push_back(pick);
    pool.erase(pool.begin() + static_cast<long>(arg));
    dist.erase(dist.begin() + static_cast<long>(arg));
    for (std::size_t i = 0; i < pool.size(); ++i)
      dist[i] = std::min(dist[i], (points[pool[i]] - points[pick]).squaredNorm());
  }
  return out;
}

}  // namespace

std::optional<double> intersect_triangle(const Ray& ray, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 p = ray.direction.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-14) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = ray.origin - a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = ray.direction.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv;
  if (t <= 0.0) return std::nullopt;
  return t;
}

Bvh::Bvh(const ConvexMesh& mesh) : vertices_(mesh.vertices), triangles_(mesh.faces) {
  if (triangles_.empty()) throw DomainError("Bvh: empty mesh");
  nodes_.reserve(2 * triangles_.size());
  build(0, static_cast<int>(triangles_.size()));
}

int Bvh::build(int first, int count) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box, centroids;
  for (int i = first; i < first + count; ++i) {
    Vec3 c = Vec3::Zero();
    for (int v : triangles_[i]) {
      box.extend(vertices_[v]);
      c += vertices_[v];
    }
    centroids.extend(c / 3.0);
  }
  nodes_[id].box = box;
  if (count <= kLeafSize) {
    nodes_[id].first = first;
    nodes_[id].count = count;
    return id;
  }
  int axis = 0;
  centroids.diagonal().maxCoeff(&axis);
  const int mid = first + count / 2;
  auto centroid = [&](const Triangle& t) {
    return vertices_[t[0]][axis] + vertices_[t[1]][axis] + vertices_[t[2]][axis];
  };
  std::nth_element(triangles_.begin() + first, triangles_.begin() + mid, triangles_.begin() + first + count,
                   [&](const Triangle& a, const Triangle& b) { return centroid(a) < centroid(b); });
  const int left = build(first, mid - first);
  const int right = build(mid, first + count - mid);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::optional<Bvh::Intersection> Bvh::intersect(const Ray& ray, double t_max) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv_dir = ray.direction.cwiseInverse();
  std::optional<Intersection> best;
  double limit = t_max;
  int stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!ray_box(ray, inv_dir, node.box, limit)) continue;
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const auto& t = triangles_[i];
        const auto hit = intersect_triangle(ray, vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
        if (hit && *hit <= limit) {
          limit = *hit;
          best = Intersection{*hit, i};
        }
      }
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return best;
}

void SensorModel::validate() const {
  if (azimuth_count < 1 || elevation_count < 1) throw DomainError("sensor: empty ray grid");
  if (!(azimuth_max >= azimuth_min) || !(elevation_max >= elevation_min))
    throw DomainError("sensor: empty field of view");
  if (elevation_min < -kPi / 2 || elevation_max > kPi / 2) throw DomainError("sensor: elevation out of range");
  if (!(max_range > 0.0)) throw DomainError("sensor: max_range must be positive");
  if (!(range_noise >= 0.0)) throw DomainError("sensor: range_noise must be non-negative");
}

std::vector<Vec3> SensorModel::directions() const {
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(ray_count()));
  auto lerp = [](double a, double b, int i, int n) { return n == 1 ? 0.5 * (a + b) : a + (b - a) * i / (n - 1); };
  for (int e = 0; e < elevation_count; ++e) {
    const double el = lerp(elevation_min, elevation_max, e, elevation_count);
    for (int a = 0; a < azimuth_count; ++a) {
      const double az = lerp(azimuth_min, azimuth_max, a, azimuth_count);
      dirs.emplace_back(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    }
  }
  return dirs;
}

RockTarget RockTarget::from_mesh(std::shared_ptr<const ConvexMesh> mesh) {
  if (!mesh) throw DomainError("RockTarget: null mesh");
  RockTarget t;
  t.bvh = std::make_shared<const Bvh>(*mesh);
  t.mesh = std::move(mesh);
  return t;
}

Hit cast_ray(const Scene& scene, const Ray& ray, double max_range) {
  Hit hit;
  double best = max_range;
  if (scene.rock && scene.rock->bvh) {
    const Pose inv = scene.rock_pose.inverse();
    const Ray local{inv * ray.origin, inv.linear() * ray.direction};
    if (auto h = scene.rock->bvh->intersect(local, best)) {
      best = h->t;
      hit.tag = HitTag::Rock;
    }
  }
  for (const auto& plate : scene.plates) {
    if (auto t = ray_plate(ray, plate); t && *t < best) {
      best = *t;
      hit.tag = HitTag::Bucket;
    }
  }
  if (scene.include_ground && ray.direction.z() < 0.0) {
    const double t = (scene.ground.height - ray.origin.z()) / ray.direction.z();
    if (t > 0.0 && t < best && scene.ground.supports(ray.origin + t * ray.direction)) {
      best = t;
      hit.tag = HitTag::Ground;
    }
  }
  if (hit.tag != HitTag::None) {
    hit.distance = best;
    hit.point = ray.origin + best * ray.direction;
  }
  return hit;
}

VirtualLidar::VirtualLidar(SensorModel model) : model_(std::move(model)) {
  model_.validate();
  directions_ = model_.directions();
}

Vec3 VirtualLidar::origin(double q_turn) const { return rot_z(q_turn) * model_.mount.translation(); }

std::vector<Hit> VirtualLidar::scan_indices(const Scene& scene, double q_turn, std::span<const int> rays,
                                            Rng* rng) const {
  const Mat3 r = rot_z(q_turn) * model_.mount.linear();
  const Vec3 o = origin(q_turn);
  std::normal_distribution<double> noise(0.0, model_.range_noise);
  std::vector<Hit> hits;
  hits.reserve(rays.size());
  for (int i : rays) {
    const Ray ray{o, r * directions_[i]};
    Hit h = cast_ray(scene, ray, model_.max_range);
    h.ray = i;
    if (h.tag != HitTag::None && rng && model_.range_noise > 0.0) {
      h.distance = std::max(0.0, h.distance + noise(*rng));
      h.point = o + h.distance * ray.direction;
    }
    hits.push_back(h);
  }
  return hits;
}

std::vector<Hit> VirtualLidar::scan(const Scene& scene, double q_turn, Rng* noise_rng) const {
  std::vector<int> all(directions_.size());
  std::iota(all.begin(), all.end(), 0);
  return scan_indices(scene, q_turn, all, noise_rng);
}

std::vector<Hit> VirtualLidar::scan_rock_window(const Scene& scene, double q_turn, Rng* noise_rng) const {
  if (!scene.rock || !scene.rock->mesh) return {};
  const Mat3 r = rot_z(q_turn) * model_.mount.linear();
  const Vec3 o = origin(q_turn);
  const Vec3 to_rock = r.transpose() * (scene.rock_pose.translation() - o);
  const double dist = to_rock.norm();
  // Small inflation keeps grazing rays inside the window despite round-off.
  const double radius = scene.rock->mesh->bounding_radius() * (1.0 + 1e-9) + 1e-9;
  std::vector<int> rays;
  if (dist <= radius) {
    rays.resize(directions_.size());
    std::iota(rays.begin(), rays.end(), 0);
  } else {
    if (dist - radius > model_.max_range) return {};
    const Vec3 axis = to_rock / dist;
    const double cos_cone = std::sqrt(std::max(0.0, 1.0 - (radius / dist) * (radius / dist)));
    for (std::size_t i = 0; i < directions_.size(); ++i)
      if (directions_[i].dot(axis) >= cos_cone - 1e-12) rays.push_back(static_cast<int>(i));
  }
  return scan_indices(scene, q_turn, rays, noise_rng);
}

std::vector<int> greedy_fps(std::span<const Vec3> points, int k, const Vec3& reference) {
  if (points.empty() || k <= 0) return {};
  std::vector<int> pool(points.size());
  std::iota(pool.begin(), pool.end(), 0);
  return greedy_order(points, std::move(pool), closest_index(points, reference),
                      std::min<int>(k, static_cast<int>(points.size())));
}

std::vector<int> farthest_point_sampling(std::span<const Vec3> points, int k, const Vec3& reference) {
  const int n = static_cast<int>(points.size());
  if (n == 0 || k <= 0) return {};
  if (k >= n || binomial(n, k, kExactSubsetLimit) > kExactSubsetLimit) return greedy_fps(points, k, reference);

  const int first = closest_index(points, reference);
  std::vector<int> best_subset;
  double best_score = -1.0;
  bool best_has_first = false;
  // Lexicographic enumeration of k-subsets.
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    const double score = min_pairwise(points, idx);
    const bool has_first = std::find(idx.begin(), idx.end(), first) != idx.end();
    if (score > best_score || (score == best_score && has_first && !best_has_first)) {
      best_score = score;
      best_subset = idx;
      best_has_first = has_first;
    }
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  int start = best_subset.front();
  double start_d = std::numeric_limits<double>::infinity();
  for (int i : best_subset) {
    const double d = (points[i] - reference).squaredNorm();
    if (d < start_d) start_d = d, start = i;
  }
  return greedy_order(points, best_subset, start, k);
}

RockCloud extract_rock_points(std::span<const Hit> hits, double q_turn, const Vec3& sensor_origin,
                              const RockCloud& previous) {
  const Mat3 to_rotbase = rot_z(q_turn).transpose();
  std::vector<Vec3> pts;
  for (const auto& h : hits)
    if (h.tag == HitTag::Rock) pts.push_back(to_rotbase * h.point);
  if (pts.empty()) {
    RockCloud held = previous;
    held.valid = false;
    return held;
  }
  const Vec3 origin_rb = to_rotbase * sensor_origin;
  const auto order = farthest_point_sampling(pts, kCloudSize, origin_rb);
  RockCloud cloud;
  cloud.valid = true;
  for (int i = 0; i < kCloudSize; ++i) cloud.points[i] = pts[order[i % order.size()]];
  return cloud;
}

}  // namespace boulder::sensor
