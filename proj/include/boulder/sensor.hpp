#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "boulder/arm.hpp"
#include "boulder/common.hpp"
#include "boulder/mesh.hpp"
#include "boulder/physics.hpp"

namespace boulder::sensor {

inline constexpr int kCloudSize = 20;

enum class HitTag : int { None = 0, Rock = 1, Bucket = 2, Ground = 3 };

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit
};

/// Median-split bounding volume hierarchy over a triangle mesh.
class Bvh {
 public:
  Bvh() = default;
  explicit Bvh(const ConvexMesh& mesh);

  struct Intersection {
    double t = 0.0;
    int triangle = -1;
  };
  /// Closest intersection with t in (0, t_max].
  std::optional<Intersection> intersect(const Ray& ray, double t_max) const;
  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1, right = -1;
    int first = 0, count = 0;
  };
  int build(int first, int count);

  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<Node> nodes_;
};

/// Möller-Trumbore ray/triangle test; returns t > 0 on a hit.
std::optional<double> intersect_triangle(const Ray& ray, const Vec3& a, const Vec3& b, const Vec3& c);

struct SensorModel {
  /// Pose in the rotating base frame; +x is the boresight, +z up.
  Pose mount = Pose::Identity();
  int azimuth_count = 128;
  int elevation_count = 32;
  double azimuth_min = -50.0 * kPi / 180.0;
  double azimuth_max = 50.0 * kPi / 180.0;
  double elevation_min = -60.0 * kPi / 180.0;
  double elevation_max = -10.0 * kPi / 180.0;
  double max_range = 15.0;
  /// Standard deviation of additive range noise, m. Zero disables it.
  double range_noise = 0.0;

  void validate() const;
  int ray_count() const { return azimuth_count * elevation_count; }
  /// Unit ray directions in the sensor frame, elevation-major.
  std::vector<Vec3> directions() const;
};

/// Rock geometry with its acceleration structure, shared between environments.
struct RockTarget {
  std::shared_ptr<const ConvexMesh> mesh;
  std::shared_ptr<const Bvh> bvh;

  static RockTarget from_mesh(std::shared_ptr<const ConvexMesh> mesh);
};

struct Scene {
  const RockTarget* rock = nullptr;
  Pose rock_pose = Pose::Identity();
  std::span<const arm::Plate> plates;
  physics::Ground ground;
  bool include_ground = true;
};

struct Hit {
  int ray = -1;
  double distance = 0.0;
  Vec3 point = Vec3::Zero();  // base frame
  HitTag tag = HitTag::None;
};

/// Nearest hit along one base-frame ray against the rock, the bucket slabs and the platform.
Hit cast_ray(const Scene& scene, const Ray& ray, double max_range);

class VirtualLidar {
 public:
  explicit VirtualLidar(SensorModel model);

  const SensorModel& model() const { return model_; }
  /// Sensor origin in the base frame.
  Vec3 origin(double q_turn) const;

  /// Casts every ray of the grid. One entry per ray (tag None on a miss).
  std::vector<Hit> scan(const Scene& scene, double q_turn, Rng* noise_rng = nullptr) const;

  /// Casts only rays whose direction lies within the rock's bounding cone. Rock-tagged hits are
  /// identical to those of a full scan; other rays are skipped.
  std::vector<Hit> scan_rock_window(const Scene& scene, double q_turn, Rng* noise_rng = nullptr) const;

 private:
  std::vector<Hit> scan_indices(const Scene& scene, double q_turn, std::span<const int> rays, Rng* rng) const;

  SensorModel model_;
  std::vector<Vec3> directions_;
};

struct RockCloud {
  std::array<Vec3, kCloudSize> points;
  bool valid = false;

  RockCloud() { points.fill(Vec3::Zero()); }
};

/// Indices of a k-point subset with large minimum pairwise distance, in selection order starting
/// from the point closest to `reference`. When the number of k-subsets is small (at most
/// kExactSubsetLimit) the subset maximizing the minimum pairwise distance is found exhaustively;
/// otherwise greedy farthest-point sampling is used.
inline constexpr long kExactSubsetLimit = 256;
std::vector<int> farthest_point_sampling(std::span<const Vec3> points, int k, const Vec3& reference);

/// Greedy farthest-point order of all points starting from the one closest to `reference`.
std::vector<int> greedy_fps(std::span<const Vec3> points, int k, const Vec3& reference);

/// Keeps rock-tagged hits, expresses them in the rotating base frame and reduces or pads them to
/// exactly kCloudSize points. With no rock hits the previous cloud is returned marked invalid.
RockCloud extract_rock_points(std::span<const Hit> hits, double q_turn, const Vec3& sensor_origin,
                              const RockCloud& previous);

}  // namespace boulder::sensor
