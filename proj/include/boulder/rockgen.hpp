#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "boulder/common.hpp"
#include "boulder/mesh.hpp"
#include "boulder/physics.hpp"

namespace boulder::rockgen {

enum class SizeClass { Small, Large };
enum class Split { Train, HeldOut };

const char* to_string(SizeClass c);
const char* to_string(Split s);
SizeClass size_class_from_string(const std::string& s);
Split split_from_string(const std::string& s);

inline constexpr double kDensity = 2500.0;

struct RockSpec {
  std::uint64_t seed = 0;
  /// Bounding-box extents along the body axes, m.
  Vec3 extents = Vec3(0.4, 0.3, 0.3);
  double density = kDensity;
  double mass_scale = 1.0;
  double friction = 0.5;
  SizeClass size = SizeClass::Small;
  Split split = Split::Train;
  /// Relative amplitude of the low-frequency radial perturbation.
  double noise = 0.25;
  std::string name;

  /// Throws DomainError if extents, mass scale or friction leave their documented ranges.
  void validate() const;
};

struct Rock {
  RockSpec spec;
  /// Hull with the center of mass at the origin.
  std::shared_ptr<const ConvexMesh> mesh;
  /// Mass properties including the spec's mass scale.
  MassProperties props;

  /// Rigid body at the origin with the given per-episode mass scale and friction.
  physics::RockBody body(double mass_scale = 1.0, double friction = -1.0) const;
};

/// Seeded point sampling on the sphere, radial noise, hull and anisotropic scaling. A degenerate
/// hull is retried with the next sub-seed.
Rock generate_rock(const RockSpec& spec);

/// Hull of the given points scaled to the spec extents. Points are used as given (no noise).
Rock generate_rock_from_points(std::span<const Vec3> points, const RockSpec& spec);

/// Builds a Rock from an existing mesh (e.g. loaded from disk), recentering on its center of mass.
Rock rock_from_mesh(ConvexMesh mesh, const RockSpec& spec);

struct DatasetOptions {
  int train = 50;
  int held_out = 25;
  /// Fraction of training rocks in the small class.
  double small_fraction = 0.5;
  SizeClass held_out_class = SizeClass::Large;
  double noise = 0.25;
};

struct Dataset {
  std::vector<RockSpec> train;
  std::vector<RockSpec> held_out;

  std::uint64_t hash() const;
  std::vector<RockSpec> all() const;
};

/// Deterministic train / held-out split with disjoint seeds. Throws DomainError for fewer than two
/// training rocks or a negative held-out count.
Dataset sample_dataset(const DatasetOptions& options, std::uint64_t seed);

/// Samples one spec of the given class.
RockSpec sample_spec(SizeClass size, std::uint64_t seed, double noise = 0.25);

void write_obj(const ConvexMesh& mesh, const std::filesystem::path& path);
ConvexMesh read_obj(const std::filesystem::path& path);

/// One OBJ mesh plus one JSON record per rock and a manifest.json. Throws std::runtime_error when
/// the directory cannot be written.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
/// Loads specs from a manifest written by write_dataset.
Dataset read_manifest(const std::filesystem::path& dir);
/// Loads the stored mesh for a spec.
Rock load_rock(const std::filesystem::path& dir, const RockSpec& spec);

}  // namespace boulder::rockgen
