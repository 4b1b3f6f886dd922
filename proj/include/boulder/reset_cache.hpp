#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "boulder/arm.hpp"
#include "boulder/config.hpp"
#include "boulder/rockgen.hpp"
#include "boulder/sensor.hpp"

namespace boulder::env {

/// Rocks of one dataset split with their ray-casting structures.
struct RockLibrary {
  std::vector<rockgen::Rock> rocks;
  std::vector<sensor::RockTarget> targets;
  /// Dataset hash mixed with the split, so caches of the two splits never alias.
  std::uint64_t dataset_hash = 0;
  rockgen::Split split = rockgen::Split::Train;

  /// Generates the split's rocks from their specs.
  static RockLibrary build(const rockgen::Dataset& dataset, rockgen::Split split);
  /// Loads the split's meshes from a dataset directory.
  static RockLibrary load(const std::filesystem::path& dir, rockgen::Split split);

  std::vector<int> select(RockSize size) const;
  bool matches(int rock, RockSize size) const;
  int find(const std::string& name) const;
};

/// Collision-free initial configuration: arm joints plus the settled rock pose (base frame).
struct ResetEntry {
  int rock = 0;
  arm::JointVector q = arm::JointVector::Zero();
  Vec3 rock_position = Vec3::Zero();
  Quat rock_orientation = Quat::Identity();
};

struct ResetCache {
  int level = 0;
  std::uint64_t dataset_hash = 0;
  std::uint64_t seed = 0;
  long attempts = 0;
  std::vector<ResetEntry> entries;

  void save(const std::filesystem::path& path) const;
  /// Throws std::runtime_error on unreadable or malformed files.
  static ResetCache load(const std::filesystem::path& path);
  static std::string file_name(int level, std::uint64_t dataset_hash, std::uint64_t seed);
};

/// Rock center relative to the initial bucket edge: (ahead toward the cabin, lateral, height).
Vec3 rock_offset(const arm::ArmModel& model, const arm::JointVector& q, const Vec3& rock_position,
                 double soil_height);

/// Re-checks an entry: inside the level's sampling box, on the platform, clear of the bucket.
bool entry_valid(const EnvConfig& cfg, const RockLibrary& lib, int level, const ResetEntry& entry);

/// Rejection-samples `count` entries for a level; attempt k uses its own seeded stream, so the
/// result depends only on (config, library, level, count, seed). Throws std::runtime_error when
/// the acceptance rate falls below 0.1%.
ResetCache populate_reset_cache(const EnvConfig& cfg, const RockLibrary& lib, int level, int count,
                                std::uint64_t seed);

}  // namespace boulder::env
