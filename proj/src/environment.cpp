#include "boulder/environment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace boulder::env {

namespace {

sensor::SensorModel mounted(const EnvConfig& cfg) {
  sensor::SensorModel s = cfg.sensor;
  s.mount = cfg.arm.sensor_mount;
  return s;
}

// Bucket motion relative to the rotating base: the cabin's own turn rate is excluded.
arm::JointVector relative_rates(arm::JointVector qd) {
  qd[arm::kTurn] = 0.0;
  return qd;
}

Pose rock_pose(const physics::RockBody& rock) {
  Pose p = Pose::Identity();
  p.linear() = rock.rotation();
  p.translation() = rock.position;
  return p;
}

}  // namespace

Context::Context(EnvConfig config, RockLibrary library)
    : cfg(std::move(config)), rocks(std::move(library)), lidar(mounted(cfg)), layout(cfg) {
  cfg.validate();
}

void Context::set_cache(ResetCache cache) {
  if (cache.level < 0 || cache.level >= kNumLevels) throw DomainError("reset cache level out of range");
  if (cache.dataset_hash != rocks.dataset_hash) throw std::runtime_error("reset cache belongs to another dataset");
  for (const auto& e : cache.entries)
    if (e.rock < 0 || e.rock >= static_cast<int>(rocks.rocks.size()))
      throw std::runtime_error("reset cache refers to a missing rock");
  const int level = cache.level;
  caches[level] = std::move(cache);
}

void Context::attach_caches(const std::filesystem::path& dir, std::uint64_t cache_seed, int count,
                            bool populate_missing) {
  for (int level = 0; level < kNumLevels; ++level) {
    const auto path = dir / ResetCache::file_name(level, rocks.dataset_hash, cache_seed);
    if (std::filesystem::exists(path)) {
      set_cache(ResetCache::load(path));
    } else if (populate_missing) {
      ResetCache c = populate_reset_cache(cfg, rocks, level, count, cache_seed);
      std::filesystem::create_directories(dir);
      c.save(path);
      set_cache(std::move(c));
    }
  }
}

Environment::Environment(std::shared_ptr<const Context> ctx, std::uint64_t seed)
    : ctx_(std::move(ctx)),
      rng_(seed),
      pipeline_(ctx_->cfg.control_dt, ctx_->cfg.max_delay, ctx_->cfg.history),
      turn_velocity_history_(static_cast<std::size_t>(ctx_->cfg.history), 0.0) {
  for (int level = 0; level < kNumLevels; ++level) {
    const auto& cache = ctx_->caches[level];
    if (!cache) continue;
    for (int i = 0; i < static_cast<int>(cache->entries.size()); ++i)
      if (ctx_->rocks.matches(cache->entries[i].rock, ctx_->cfg.rock_size)) entries_[level].push_back(i);
  }
}

EpisodeInit Environment::sample_init(int level) {
  const auto& cfg = ctx_->cfg;
  if (level < 0 || level >= kNumLevels) throw DomainError("level out of range");
  const auto& cache = ctx_->caches[level];
  if (!cache) throw std::runtime_error("no reset cache for level " + std::to_string(level) + "; run `boulder cache`");
  const auto& pool = entries_[level];
  if (pool.empty()) throw std::runtime_error("reset cache for level " + std::to_string(level) + " has no usable entries");

  EpisodeInit init;
  init.level = level;
  init.entry = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng_)];
  const ResetEntry& e = cache->entries[init.entry];
  init.rock = e.rock;
  init.q = e.q;
  init.rock_position = e.rock_position;
  init.rock_orientation = e.rock_orientation;
  init.delay = uniform(rng_, 0.0, cfg.max_delay);
  init.mass_scale = uniform(rng_, cfg.mass_scale_min, cfg.mass_scale_max);
  init.friction = uniform(rng_, cfg.friction_min, cfg.friction_max);

  const LevelSpec& spec = cfg.levels[level];
  switch (cfg.soil_mode) {
    case SoilMode::Soft: init.soil = cfg.soft; break;
    case SoilMode::Hard: init.soil = cfg.hard; break;
    case SoilMode::Curriculum:
      if (spec.randomize_soil) {
        auto mix = [&](double a, double b) { return a + uniform(rng_, 0.0, 1.0) * (b - a); };
        init.soil = cfg.soft;
        init.soil.cohesion = mix(cfg.soft.cohesion, cfg.hard.cohesion);
        init.soil.friction_angle = mix(cfg.soft.friction_angle, cfg.hard.friction_angle);
        init.soil.unit_weight = mix(cfg.soft.unit_weight, cfg.hard.unit_weight);
        init.soil.metal_friction_angle = mix(cfg.soft.metal_friction_angle, cfg.hard.metal_friction_angle);
        init.soil.cavity_expansion = mix(cfg.soft.cavity_expansion, cfg.hard.cavity_expansion);
        init.soil.adhesion_ratio = mix(cfg.soft.adhesion_ratio, cfg.hard.adhesion_ratio);
        init.soil.cutting_resistance = uniform(rng_, cfg.cutting_resistance_min, cfg.cutting_resistance_max);
      } else {
        init.soil = cfg.soft;
      }
      break;
  }
  init.soil.surface_height = cfg.ground.height;
  init.flags.t6 = spec.t6;
  init.flags.p5 = spec.p5;
  init.noise_seed = rng_();
  return init;
}

const Eigen::VectorXd& Environment::reset(int level) { return reset(sample_init(level)); }

const Eigen::VectorXd& Environment::reset(const EpisodeInit& init) {
  const auto& cfg = ctx_->cfg;
  if (init.rock < 0 || init.rock >= static_cast<int>(ctx_->rocks.rocks.size())) throw DomainError("reset: bad rock index");
  if (!cfg.arm.within_limits(init.q)) throw DomainError("reset: joints outside limits");
  init.soil.validate();
  init_ = init;
  q_ = init.q;
  qd_.setZero();
  prev_action_.setZero();
  action_.setZero();
  rock_ = ctx_->rocks.rocks[init.rock].body(init.mass_scale, init.friction);
  rock_.position = init.rock_position;
  rock_.orientation = init.rock_orientation.normalized();
  pipeline_.reset(init.delay);
  std::fill(turn_velocity_history_.begin(), turn_velocity_history_.end(), 0.0);
  turn_velocity_head_ = 0;
  cloud_ = sensor::RockCloud{};
  noise_rng_.seed(init.noise_seed);
  steps_ = 0;
  done_ = false;

  sense();
  update_torques(SubstepOutput{});
  obs_ = ctx_->layout.observe(raw_observation());
  records_.clear();
  if (recording_) record(nullptr, soil::excavation_slice(q_[arm::kTurn], bucket_base(), Vec3::Zero(),
                                                         cfg.arm.bucket, init_.soil.surface_height));
  return obs_;
}

Pose Environment::bucket_base() const { return arm::chain_frames(ctx_->cfg.arm, q_)[arm::kNumJoints]; }

arm::JointVector Environment::derate(const arm::ChainFrames& frames, const arm::JointVector& qd,
                                     soil::SoilLoad* load) const {
  const auto& model = ctx_->cfg.arm;
  const Pose& bucket = frames[arm::kNumJoints];
  const Vec3 edge = bucket * model.bucket.edge_point();
  const auto jac = arm::point_jacobian(model, frames, edge);
  const arm::JointVector rating = model.torque_rating();
  arm::JointVector rate = qd;
  for (int pass = 0; pass <= arm::kNumJoints; ++pass) {
    *load = soil::apply_soil_force(q_[arm::kTurn], bucket, jac * rate, model.bucket, init_.soil);
    if (load->force.squaredNorm() == 0.0) break;
    const arm::JointVector effort = -jac.transpose() * load->force;
    bool changed = false;
    for (int i = 0; i < arm::kNumJoints; ++i) {
      // The actuator stalls when the soil resists its motion beyond its rating.
      if (rate[i] != 0.0 && effort[i] * rate[i] > 0.0 && std::abs(effort[i]) > rating[i]) {
        rate[i] = 0.0;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return rate;
}

Environment::SubstepOutput Environment::substep(const arm::JointVector& command, double h) {
  const auto& cfg = ctx_->cfg;
  const auto& model = cfg.arm;
  const arm::JointVector lo = model.q_min(), hi = model.q_max(), qd_max = model.qd_max();

  arm::JointVector rate = command.cwiseMax(-qd_max).cwiseMin(qd_max);
  for (int i = 0; i < arm::kNumJoints; ++i) {
    if ((q_[i] >= hi[i] && rate[i] > 0.0) || (q_[i] <= lo[i] && rate[i] < 0.0)) rate[i] = 0.0;
  }
  const arm::ChainFrames frames = arm::chain_frames(model, q_);
  soil::SoilLoad load;
  rate = derate(frames, rate, &load);

  const Pose& bucket = frames[arm::kNumJoints];
  arm::BucketPlates plates = arm::world_plates(model.bucket, bucket);
  const auto ang = arm::angular_jacobian(model, frames);
  const Vec3 omega = ang * rate;
  for (auto& p : plates) {
    p.linear_velocity = arm::point_jacobian(model, frames, p.center()) * rate;
    p.angular_velocity = omega;
  }

  SubstepOutput out;
  const auto contacts = physics::detect_contacts(rock_, cfg.ground, plates, cfg.contact.margin);
  auto res = physics::step_dynamics(rock_, contacts, plates, {}, h, cfg.contact);
  rock_ = std::move(res.rock);
  for (auto& f : res.forces)
    if (f.pair != physics::kGroundPair) out.contact_forces.push_back(f);
  out.soil_force = load.force;
  out.soil_point = load.point;
  out.cut = load.cut;

  q_ = arm::integrate_joints(model, q_, rate, h).q;
  return out;
}

void Environment::sense() {
  const auto& cfg = ctx_->cfg;
  if (!rock_.finite()) return;
  const Pose bucket = bucket_base();
  const auto plates = arm::world_plates(cfg.arm.bucket, bucket);
  sensor::Scene scene;
  scene.rock = &ctx_->rocks.targets[init_.rock];
  scene.rock_pose = rock_pose(rock_);
  scene.plates = plates;
  scene.ground = cfg.ground;
  const double turn = q_[arm::kTurn];
  const auto hits = ctx_->lidar.scan_rock_window(scene, turn, cfg.sensor.range_noise > 0.0 ? &noise_rng_ : nullptr);
  rock_hits_ = static_cast<int>(
      std::count_if(hits.begin(), hits.end(), [](const sensor::Hit& h) { return h.tag == sensor::HitTag::Rock; }));
  cloud_ = sensor::extract_rock_points(hits, turn, ctx_->lidar.origin(turn), cloud_);
}

void Environment::update_torques(const SubstepOutput& out) {
  const auto& model = ctx_->cfg.arm;
  std::vector<arm::PointLoad> loads;
  if (out.soil_force.squaredNorm() > 0.0) loads.push_back({out.soil_point, out.soil_force});
  for (const auto& f : out.contact_forces) loads.push_back({f.point, -f.force});
  tau_ = arm::static_joint_loads(model, arm::chain_frames(model, q_), loads);
}

StepState Environment::build_state(const SubstepOutput& out, double base_speed) const {
  const auto& cfg = ctx_->cfg;
  const auto& model = cfg.arm;
  const double g = cfg.ground.height;
  const double turn = q_[arm::kTurn];
  const Mat3 to_rotbase = rot_z(-turn);
  const arm::ChainFrames frames = arm::chain_frames(model, q_);
  const Pose& bucket = frames[arm::kNumJoints];

  StepState s;
  s.time = steps_ * cfg.control_dt;
  s.rock_base = rock_.position - Vec3(0, 0, g);
  s.rock_rotbase = to_rotbase * rock_.position - Vec3(0, 0, g);
  s.rock_reset_z = init_.rock_position.z() - g;
  s.bucket_base = bucket.translation() - Vec3(0, 0, g);
  s.bucket_rotbase = to_rotbase * bucket.translation() - Vec3(0, 0, g);
  s.bucket_velocity = to_rotbase * (arm::point_jacobian(model, frames, bucket.translation()) * relative_rates(qd_));
  s.bottom_plate_z = (bucket * Vec3(-0.5 * model.bucket.length, 0.0, 0.0)).z() - g;
  s.in_shovel = physics::rock_in_shovel(rock_.position, model.bucket, bucket);
  s.curl = arm::curl_angle(arm::rotbase_frame(turn).inverse() * bucket);
  const Vec3 edge = bucket * model.bucket.edge_point();
  const auto cut = soil::excavation_slice(turn, bucket, arm::point_jacobian(model, frames, edge) * qd_, model.bucket,
                                          init_.soil.surface_height);
  s.edge_depth = cut.depth;
  s.edge_speed = cut.velocity.norm();
  s.angle_of_attack = s.edge_speed > 0.0 ? angle_of_attack(bucket, cut.radial, cut.velocity) : 0.0;
  s.base_speed = base_speed;
  s.qd = qd_;
  s.qd_max = model.qd_max();
  (void)out;
  return s;
}

RawObservation Environment::raw_observation() const {
  const auto& model = ctx_->cfg.arm;
  const double turn = q_[arm::kTurn];
  const arm::ChainFrames frames = arm::chain_frames(model, q_);
  const Pose bucket = frames[arm::kNumJoints];
  const Mat3 to_rotbase = rot_z(-turn);

  RawObservation raw;
  raw.q = q_;
  raw.qd = qd_;
  raw.tau = tau_;
  raw.q_turn = turn;
  const int L = ctx_->cfg.history;
  raw.turn_velocity_history.resize(L);
  raw.turn_action_history.resize(L);
  for (int i = 0; i < L; ++i) {
    raw.turn_velocity_history[i] = turn_velocity_history_[((turn_velocity_head_ - i) % L + L) % L];
    raw.turn_action_history[i] = pipeline_.turn_history(i);
  }
  raw.bucket_position = to_rotbase * bucket.translation();
  raw.bucket_orientation = Quat(to_rotbase * bucket.linear());
  raw.bucket_linear = to_rotbase * (arm::point_jacobian(model, frames, bucket.translation()) * relative_rates(qd_));
  raw.bucket_angular = to_rotbase * (arm::angular_jacobian(model, frames) * relative_rates(qd_));
  raw.cloud = cloud_;
  raw.prev_action = prev_action_;
  return raw;
}

StepResult Environment::step(const arm::JointVector& action) {
  if (done_) throw std::logic_error("step called on a finished episode; reset first");
  const auto& cfg = ctx_->cfg;
  const auto& model = cfg.arm;
  const arm::JointVector qd_max = model.qd_max();

  bool fault = !action.allFinite();
  const arm::JointVector a = fault ? arm::JointVector(arm::JointVector::Zero()) : arm::JointVector(action.cwiseMax(-1.0).cwiseMin(1.0));
  arm::JointVector command = a.cwiseProduct(qd_max);
  const double turn_command = command[arm::kTurn];
  command[arm::kTurn] = arm::apply_deadband(command[arm::kTurn], cfg.turn_deadband);
  const arm::JointVector executed = pipeline_.push(command);

  const arm::JointVector q0 = q_;
  const double h = cfg.physics_dt();
  SubstepOutput out;
  double machine_force = 0.0;
  for (int s = 0; s < cfg.substeps && !fault; ++s) {
    out = substep(executed, h);
    Vec3 f = out.soil_force;
    for (const auto& c : out.contact_forces) f -= c.force;
    machine_force += f.head<2>().norm() / cfg.substeps;
    if (!rock_.finite()) fault = true;
  }
  qd_ = (q_ - q0) / cfg.control_dt;
  turn_velocity_head_ = (turn_velocity_head_ + 1) % cfg.history;
  turn_velocity_history_[turn_velocity_head_] = qd_[arm::kTurn];
  ++steps_;

  const double grip = model.base_friction * cfg.machine_mass * cfg.contact.gravity;
  const double base_speed = std::max(0.0, machine_force - grip) / cfg.machine_mass * cfg.control_dt;

  StepResult result;
  if (!fault) {
    update_torques(out);
    sense();
    result.state = build_state(out, base_speed);
  } else {
    result.state.time = time();
    result.state.rock_base = Vec3::Zero();
  }
  result.state.fault = fault;
  result.state.turn_command = turn_command;
  result.state.action = a;
  result.state.prev_action = prev_action_;

  result.cause = check_termination(result.state, cfg.limits, cfg.rewards, init_.flags);
  result.terms = compute_rewards(result.state, cfg.rewards, cfg.limits, init_.flags, cfg.turn_deadband, result.cause);
  result.reward = result.terms.total();
  result.done = result.cause != Termination::None;
  result.timeout = result.cause == Termination::Timeout;

  prev_action_ = a;
  action_ = action;
  obs_ = ctx_->layout.observe(raw_observation());
  done_ = result.done;
  if (recording_) record(&result, out.cut);
  return result;
}

void Environment::record(const StepResult* result, const soil::CutState& cut) {
  StepRecord r;
  r.time = time();
  r.q = q_;
  r.qd = qd_;
  r.tau = tau_;
  r.action = action_;
  r.bucket_base = bucket_base();
  r.rock_position = rock_.position;
  r.rock_orientation = rock_.orientation;
  if (result) {
    r.terms = result->terms;
    r.cause = result->cause;
    r.edge_depth = result->state.edge_depth;
  } else {
    r.edge_depth = cut.depth;
  }
  const Vec3 edge = r.bucket_base * ctx_->cfg.arm.bucket.edge_point();
  r.edge_radial = (rot_z(-q_[arm::kTurn]) * edge).x();
  r.edge_height = edge.z() - ctx_->cfg.ground.height;
  r.rock_hits = rock_hits_;
  r.cloud = cloud_;
  records_.push_back(r);
}

}  // namespace boulder::env
