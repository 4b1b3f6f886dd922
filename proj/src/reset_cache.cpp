#include "boulder/reset_cache.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "boulder/physics.hpp"

namespace boulder::env {

namespace {

using nlohmann::json;

constexpr double kClearance = 0.05;   // initial gap between rock and bucket, m
constexpr double kDropHeight = 0.01;  // lowest vertex above the platform before settling, m
constexpr int kSettleSubsteps = 480;
constexpr int kMinVisibleHits = 3;

Quat random_orientation(Rng& rng) {
  std::normal_distribution<double> g;
  Quat q(g(rng), g(rng), g(rng), g(rng));
  if (q.norm() < 1e-9) return Quat::Identity();
  q.normalize();
  return q;
}

/// Ground far below so only plate contacts are reported.
physics::Ground no_ground() {
  physics::Ground g;
  g.height = -1e9;
  return g;
}

bool touches_bucket(const physics::RockBody& rock, const arm::BucketPlates& plates, double margin) {
  return !physics::detect_contacts(rock, no_ground(), plates, margin).empty();
}

bool on_platform(const physics::RockBody& rock, const physics::Ground& ground) {
  for (std::size_t i = 0; i < rock.mesh->vertices.size(); ++i)
    if (!ground.supports(rock.world_vertex(i))) return false;
  return true;
}

/// Lets the rock come to rest on the platform next to a static bucket. False if it touches the
/// bucket or does not settle.
bool settle(physics::RockBody& rock, const EnvConfig& cfg, const arm::BucketPlates& plates) {
  const double h = cfg.physics_dt();
  int quiet = 0;
  for (int i = 0; i < kSettleSubsteps; ++i) {
    const auto contacts = physics::detect_contacts(rock, cfg.ground, plates, cfg.contact.margin);
    for (const auto& c : contacts)
      if (c.pair != physics::kGroundPair) return false;
    const auto res = physics::step_dynamics(rock, contacts, plates, {}, h, cfg.contact);
    if (res.fault || !res.rock.finite()) return false;
    rock = res.rock;
    quiet = (rock.linear_velocity.norm() < 2e-3 && rock.angular_velocity.norm() < 5e-3) ? quiet + 1 : 0;
    if (quiet >= 12) {
      rock.linear_velocity.setZero();
      rock.angular_velocity.setZero();
      return true;
    }
  }
  return false;
}

json to_json(const ResetEntry& e) {
  return json{{"rock", e.rock},
              {"q", std::vector<double>(e.q.data(), e.q.data() + arm::kNumJoints)},
              {"rock_position", {e.rock_position.x(), e.rock_position.y(), e.rock_position.z()}},
              {"rock_orientation", {e.rock_orientation.w(), e.rock_orientation.x(), e.rock_orientation.y(),
                                    e.rock_orientation.z()}}};
}

ResetEntry entry_from_json(const json& j) {
  ResetEntry e;
  e.rock = j.at("rock").get<int>();
  const auto q = j.at("q").get<std::vector<double>>();
  const auto p = j.at("rock_position").get<std::vector<double>>();
  const auto o = j.at("rock_orientation").get<std::vector<double>>();
  if (q.size() != arm::kNumJoints || p.size() != 3 || o.size() != 4) throw std::runtime_error("bad cache entry");
  for (int i = 0; i < arm::kNumJoints; ++i) e.q[i] = q[i];
  e.rock_position = Vec3(p[0], p[1], p[2]);
  e.rock_orientation = Quat(o[0], o[1], o[2], o[3]);
  return e;
}

}  // namespace

RockLibrary RockLibrary::build(const rockgen::Dataset& dataset, rockgen::Split split) {
  RockLibrary lib;
  lib.dataset_hash = mix_seed(dataset.hash(), static_cast<std::uint64_t>(split));
  lib.split = split;
  for (const auto& spec : split == rockgen::Split::Train ? dataset.train : dataset.held_out) {
    lib.rocks.push_back(rockgen::generate_rock(spec));
    lib.targets.push_back(sensor::RockTarget::from_mesh(lib.rocks.back().mesh));
  }
  if (lib.rocks.empty()) throw DomainError("rock library: split is empty");
  return lib;
}

RockLibrary RockLibrary::load(const std::filesystem::path& dir, rockgen::Split split) {
  const rockgen::Dataset dataset = rockgen::read_manifest(dir);
  RockLibrary lib;
  lib.dataset_hash = mix_seed(dataset.hash(), static_cast<std::uint64_t>(split));
  lib.split = split;
  for (const auto& spec : split == rockgen::Split::Train ? dataset.train : dataset.held_out) {
    lib.rocks.push_back(rockgen::load_rock(dir, spec));
    lib.targets.push_back(sensor::RockTarget::from_mesh(lib.rocks.back().mesh));
  }
  if (lib.rocks.empty()) throw DomainError("rock library: split is empty");
  return lib;
}

bool RockLibrary::matches(int rock, RockSize size) const {
  const auto c = rocks.at(rock).spec.size;
  return size == RockSize::Any || (size == RockSize::Small && c == rockgen::SizeClass::Small) ||
         (size == RockSize::Large && c == rockgen::SizeClass::Large);
}

std::vector<int> RockLibrary::select(RockSize size) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(rocks.size()); ++i)
    if (matches(i, size)) out.push_back(i);
  return out;
}

int RockLibrary::find(const std::string& name) const {
  for (int i = 0; i < static_cast<int>(rocks.size()); ++i)
    if (rocks[i].spec.name == name) return i;
  return -1;
}

void ResetCache::save(const std::filesystem::path& path) const {
  json j;
  j["format"] = "boulder-reset-cache-1";
  j["level"] = level;
  j["dataset_hash"] = dataset_hash;
  j["seed"] = seed;
  j["attempts"] = attempts;
  j["entries"] = json::array();
  for (const auto& e : entries) j["entries"].push_back(to_json(e));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write reset cache " + path.string());
  out << j.dump() << "\n";
  if (!out) throw std::runtime_error("cannot write reset cache " + path.string());
}

ResetCache ResetCache::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read reset cache " + path.string());
  try {
    const json j = json::parse(in);
    if (j.at("format").get<std::string>() != "boulder-reset-cache-1")
      throw std::runtime_error("unknown reset cache format");
    ResetCache c;
    c.level = j.at("level").get<int>();
    c.dataset_hash = j.at("dataset_hash").get<std::uint64_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.attempts = j.at("attempts").get<long>();
    for (const auto& e : j.at("entries")) c.entries.push_back(entry_from_json(e));
    return c;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed reset cache " + path.string() + ": " + e.what());
  }
}

std::string ResetCache::file_name(int level, std::uint64_t dataset_hash, std::uint64_t seed) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "reset_level%d_%016" PRIx64 "_%" PRIu64 ".json", level, dataset_hash, seed);
  return buf;
}

Vec3 rock_offset(const arm::ArmModel& model, const arm::JointVector& q, const Vec3& rock_position,
                 double soil_height) {
  const auto pose = arm::forward_kinematics(model, q);
  const Mat3 to_rotbase = rot_z(-q[arm::kTurn]);
  const Vec3 edge = pose.rotbase.translation();
  const Vec3 rock = to_rotbase * rock_position;
  return Vec3(edge.x() - rock.x(), rock.y() - edge.y(), rock.z() - soil_height);
}

bool entry_valid(const EnvConfig& cfg, const RockLibrary& lib, int level, const ResetEntry& e) {
  if (e.rock < 0 || e.rock >= static_cast<int>(lib.rocks.size())) return false;
  if (!cfg.arm.within_limits(e.q)) return false;
  const LevelSpec& spec = cfg.levels.at(level);
  const Vec3 off = rock_offset(cfg.arm, e.q, e.rock_position, cfg.ground.height);
  const double eps = 1e-9;
  if (off.x() < spec.ahead_min - eps || off.x() > spec.ahead_max + eps) return false;
  if (std::abs(off.y()) > spec.lateral_half + eps) return false;
  if (off.z() < -eps || off.z() > spec.height + eps) return false;
  if (e.rock_position.head<2>().norm() < spec.rock_radial_min - eps) return false;

  physics::RockBody rock = lib.rocks[e.rock].body();
  rock.position = e.rock_position;
  rock.orientation = e.rock_orientation;
  if (!on_platform(rock, cfg.ground)) return false;
  const auto pose = arm::forward_kinematics(cfg.arm, e.q);
  const auto plates = arm::world_plates(cfg.arm.bucket, pose.base);
  return !touches_bucket(rock, plates, cfg.contact.margin);
}

ResetCache populate_reset_cache(const EnvConfig& cfg, const RockLibrary& lib, int level, int count,
                                std::uint64_t seed) {
  if (count <= 0) throw DomainError("reset cache: count must be positive");
  if (level < 0 || level >= kNumLevels) throw DomainError("reset cache: level out of range");
  const LevelSpec& spec = cfg.levels[level];
  sensor::SensorModel sm = cfg.sensor;
  sm.mount = cfg.arm.sensor_mount;
  const sensor::VirtualLidar lidar(sm);

  ResetCache cache;
  cache.level = level;
  cache.dataset_hash = lib.dataset_hash;
  cache.seed = seed;

  arm::JointVector nominal;
  nominal << 0.0, -0.3, 1.6, 0.6, 0.6;
  const arm::JointVector lo = cfg.arm.q_min(), hi = cfg.arm.q_max();
  const auto n_rocks = static_cast<std::uint64_t>(lib.rocks.size());

  for (long attempt = 0; static_cast<int>(cache.entries.size()) < count; ++attempt) {
    if (attempt >= 2000 && static_cast<double>(cache.entries.size()) < 0.001 * static_cast<double>(attempt)) {
      throw std::runtime_error("reset cache: acceptance rate below 0.1% for level " + std::to_string(level) +
                               " after " + std::to_string(attempt) + " attempts; check level sampling ranges");
    }
    cache.attempts = attempt + 1;
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
    ResetEntry e;
    e.rock = static_cast<int>(rng() % n_rocks);

    arm::JointVector seed_q = nominal;
    seed_q[arm::kTurn] = uniform(rng, std::max(spec.turn_min, lo[arm::kTurn]), std::min(spec.turn_max, hi[arm::kTurn]));
    seed_q[arm::kTele] = uniform(rng, lo[arm::kTele], hi[arm::kTele]);
    const double radial = uniform(rng, spec.edge_radial_min, spec.edge_radial_max);
    const double height = uniform(rng, spec.edge_height_min, spec.edge_height_max);
    const double curl = uniform(rng, spec.curl_min, spec.curl_max);
    const auto q = arm::solve_planar_ik(cfg.arm, radial, cfg.ground.height + height, curl, seed_q);
    if (!q) continue;
    e.q = *q;

    const double ahead = uniform(rng, spec.ahead_min, spec.ahead_max);
    const double lateral = uniform(rng, -spec.lateral_half, spec.lateral_half);
    const Quat orientation = random_orientation(rng);

    const auto pose = arm::forward_kinematics(cfg.arm, e.q);
    const Vec3 edge = pose.rotbase.translation();
    const Mat3 to_base = rot_z(e.q[arm::kTurn]);

    physics::RockBody rock = lib.rocks[e.rock].body();
    rock.orientation = orientation;
    rock.position = to_base * Vec3(edge.x() - ahead, edge.y() + lateral, 0.0);
    rock.position.z() = cfg.ground.height + kDropHeight - (rock.lowest_point() - rock.position.z());
    if (rock.position.head<2>().norm() < spec.rock_radial_min) continue;
    if (!on_platform(rock, cfg.ground)) continue;

    const auto plates = arm::world_plates(cfg.arm.bucket, pose.base);
    if (touches_bucket(rock, plates, kClearance)) continue;
    if (!settle(rock, cfg, plates)) continue;

    e.rock_position = rock.position;
    e.rock_orientation = rock.orientation.normalized();
    if (!entry_valid(cfg, lib, level, e)) continue;

    sensor::Scene scene;
    scene.rock = &lib.targets[e.rock];
    scene.rock_pose = Pose::Identity();
    scene.rock_pose.linear() = e.rock_orientation.toRotationMatrix();
    scene.rock_pose.translation() = e.rock_position;
    scene.plates = plates;
    scene.ground = cfg.ground;
    const auto hits = lidar.scan_rock_window(scene, e.q[arm::kTurn]);
    const auto visible = std::count_if(hits.begin(), hits.end(),
                                       [](const sensor::Hit& h) { return h.tag == sensor::HitTag::Rock; });
    if (visible < kMinVisibleHits) continue;

    cache.entries.push_back(e);
  }
  return cache;
}

}  // namespace boulder::env
