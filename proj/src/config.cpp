#include "boulder/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace boulder {

namespace {

const char* kJointNames[arm::kNumJoints] = {"turn", "boom", "stick", "tele", "pitch"};

/// Reads fields from a YAML map, rejecting unknown keys.
class Reader {
 public:
  Reader(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw DomainError("config: " + path_ + " must be a mapping");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0 || !node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw DomainError("config: unknown key " + path_ + key);
    }
  }

  template <class T>
  void field(const char* key, T& value) {
    seen_.insert(key);
    if (!node_ || !node_[key]) return;
    try {
      read(node_[key], value);
    } catch (const YAML::Exception& e) {
      throw DomainError("config: bad value for " + path_ + key + ": " + e.what());
    }
  }

  void section(const char* key, const std::function<void(Reader&)>& body) {
    seen_.insert(key);
    Reader sub(node_ ? node_[key] : YAML::Node(), path_ + key + ".");
    body(sub);
  }

  void list(const char* key, std::size_t n, const std::function<void(Reader&, std::size_t)>& body) {
    seen_.insert(key);
    if (!node_ || !node_[key]) {
      for (std::size_t i = 0; i < n; ++i) {
        Reader sub(YAML::Node(), path_ + key + "[" + std::to_string(i) + "].");
        body(sub, i);
      }
      return;
    }
    const YAML::Node seq = node_[key];
    if (!seq.IsSequence() || seq.size() != n)
      throw DomainError("config: " + path_ + key + " must be a list of " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
      Reader sub(seq[i], path_ + key + "[" + std::to_string(i) + "].");
      body(sub, i);
    }
  }

 private:
  static void read(const YAML::Node& n, double& v) { v = n.as<double>(); }
  static void read(const YAML::Node& n, int& v) { v = n.as<int>(); }
  static void read(const YAML::Node& n, bool& v) { v = n.as<bool>(); }
  static void read(const YAML::Node& n, unsigned& v) { v = n.as<unsigned>(); }
  static void read(const YAML::Node& n, std::uint64_t& v) { v = n.as<std::uint64_t>(); }
  static void read(const YAML::Node& n, std::string& v) { v = n.as<std::string>(); }
  static void read(const YAML::Node& n, Vec3& v) {
    if (!n.IsSequence() || n.size() != 3) throw DomainError("expected a 3-vector");
    for (int i = 0; i < 3; ++i) v[i] = n[i].as<double>();
  }
  static void read(const YAML::Node& n, SoilMode& v) { v = soil_mode_from_string(n.as<std::string>()); }
  static void read(const YAML::Node& n, RockSize& v) { v = rock_size_from_string(n.as<std::string>()); }
  static void read(const YAML::Node& n, rockgen::Split& v) { v = rockgen::split_from_string(n.as<std::string>()); }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  explicit Writer(YAML::Emitter& out) : out_(out) {}

  template <class T>
  void field(const char* key, T& value) {
    out_ << YAML::Key << key << YAML::Value;
    write(value);
  }
  void section(const char* key, const std::function<void(Writer&)>& body) {
    out_ << YAML::Key << key << YAML::Value << YAML::BeginMap;
    body(*this);
    out_ << YAML::EndMap;
  }
  void list(const char* key, std::size_t n, const std::function<void(Writer&, std::size_t)>& body) {
    out_ << YAML::Key << key << YAML::Value << YAML::BeginSeq;
    for (std::size_t i = 0; i < n; ++i) {
      out_ << YAML::BeginMap;
      body(*this, i);
      out_ << YAML::EndMap;
    }
    out_ << YAML::EndSeq;
  }

 private:
  void write(double v) { out_ << v; }
  void write(int v) { out_ << v; }
  void write(bool v) { out_ << v; }
  void write(unsigned v) { out_ << v; }
  void write(std::uint64_t v) { out_ << v; }
  void write(const std::string& v) { out_ << v; }
  void write(const Vec3& v) { out_ << YAML::Flow << YAML::BeginSeq << v.x() << v.y() << v.z() << YAML::EndSeq; }
  void write(SoilMode v) { out_ << to_string(v); }
  void write(RockSize v) { out_ << to_string(v); }
  void write(rockgen::Split v) { out_ << rockgen::to_string(v); }

  YAML::Emitter& out_;
};

template <class V>
void visit_soil(V& v, soil::SoilParams& s) {
  v.field("cohesion", s.cohesion);
  v.field("friction_angle", s.friction_angle);
  v.field("unit_weight", s.unit_weight);
  v.field("metal_friction_angle", s.metal_friction_angle);
  v.field("cavity_expansion", s.cavity_expansion);
  v.field("adhesion_ratio", s.adhesion_ratio);
  v.field("cutting_resistance", s.cutting_resistance);
  v.field("surface_height", s.surface_height);
}

template <class V>
void visit(V& v, EnvConfig& c) {
  v.field("seed", c.seed);
  v.field("control_dt", c.control_dt);
  v.field("substeps", c.substeps);
  v.field("max_delay", c.max_delay);
  v.field("history", c.history);
  v.field("turn_deadband", c.turn_deadband);
  v.field("machine_mass", c.machine_mass);

  v.section("arm", [&](V& a) {
    a.list("joints", arm::kNumJoints, [&](V& j, std::size_t i) {
      auto& js = c.arm.joints[i];
      std::string name = kJointNames[i];
      j.field("name", name);
      if (name != kJointNames[i]) throw DomainError(std::string("config: joint ") + std::to_string(i) + " must be " + kJointNames[i]);
      Vec3 offset = js.parent_offset.translation();
      j.field("offset", offset);
      js.parent_offset.translation() = offset;
      j.field("q_min", js.q_min);
      j.field("q_max", js.q_max);
      j.field("qd_max", js.qd_max);
      j.field("torque_rating", js.torque_rating);
      j.field("link_mass", js.link_mass);
      j.field("link_com", js.link_com);
    });
    a.section("bucket", [&](V& b) {
      b.field("length", c.arm.bucket.length);
      b.field("width", c.arm.bucket.width);
      b.field("height", c.arm.bucket.height);
      b.field("plate_thickness", c.arm.bucket.plate_thickness);
      b.field("edge_thickness", c.arm.bucket.edge_thickness);
      b.field("mass", c.arm.bucket.mass);
      b.field("com", c.arm.bucket.com);
    });
    Vec3 mount = c.arm.sensor_mount.translation();
    a.field("sensor_mount", mount);
    c.arm.sensor_mount.translation() = mount;
    a.field("base_friction", c.arm.base_friction);
  });

  v.section("contact", [&](V& s) {
    s.field("stiffness", c.contact.stiffness);
    s.field("damping_ratio", c.contact.damping_ratio);
    s.field("iterations", c.contact.iterations);
    s.field("gravity", c.contact.gravity);
    s.field("margin", c.contact.margin);
  });
  v.section("platform", [&](V& s) {
    s.field("height", c.ground.height);
    s.field("x_min", c.ground.x_min);
    s.field("x_max", c.ground.x_max);
    s.field("y_min", c.ground.y_min);
    s.field("y_max", c.ground.y_max);
  });
  v.section("soil", [&](V& s) {
    s.field("mode", c.soil_mode);
    s.section("soft", [&](V& p) { visit_soil(p, c.soft); });
    s.section("hard", [&](V& p) { visit_soil(p, c.hard); });
    s.field("cutting_resistance_min", c.cutting_resistance_min);
    s.field("cutting_resistance_max", c.cutting_resistance_max);
  });
  v.section("sensor", [&](V& s) {
    s.field("azimuth_count", c.sensor.azimuth_count);
    s.field("elevation_count", c.sensor.elevation_count);
    s.field("azimuth_min", c.sensor.azimuth_min);
    s.field("azimuth_max", c.sensor.azimuth_max);
    s.field("elevation_min", c.sensor.elevation_min);
    s.field("elevation_max", c.sensor.elevation_max);
    s.field("max_range", c.sensor.max_range);
    s.field("range_noise", c.sensor.range_noise);
  });
  v.section("rewards", [&](V& s) {
    auto& w = c.rewards;
    s.field("r1", w.r1); s.field("r2", w.r2); s.field("r3", w.r3); s.field("r4", w.r4);
    s.field("r5", w.r5); s.field("r6", w.r6); s.field("r7", w.r7);
    s.field("p1", w.p1); s.field("p2", w.p2); s.field("p3", w.p3);
    s.field("p4", w.p4); s.field("p5", w.p5); s.field("p6", w.p6);
    s.field("theta_target", w.theta_target);
    s.field("h_desired", w.h_desired);
    s.field("v_max", w.v_max);
    s.field("proximity", w.proximity);
    s.field("d_soft", w.d_soft);
    s.field("d_hard", w.d_hard);
    s.field("y_min", w.y_min);
    s.field("y_max", w.y_max);
  });
  v.section("terminations", [&](V& s) {
    auto& l = c.limits;
    s.field("time_limit", l.time_limit);
    s.field("v_max_base", l.v_max_base);
    s.field("v_max_term", l.v_max_term);
    s.field("h_min", l.h_min);
    s.field("alpha_threshold", l.alpha_threshold);
    s.field("alpha_min_speed", l.alpha_min_speed);
    s.field("in_soil_depth", l.in_soil_depth);
  });
  v.list("levels", kNumLevels, [&](V& s, std::size_t i) {
    auto& l = c.levels[i];
    s.field("ahead_min", l.ahead_min);
    s.field("ahead_max", l.ahead_max);
    s.field("lateral_half", l.lateral_half);
    s.field("height", l.height);
    s.field("turn_min", l.turn_min);
    s.field("turn_max", l.turn_max);
    s.field("edge_radial_min", l.edge_radial_min);
    s.field("edge_radial_max", l.edge_radial_max);
    s.field("edge_height_min", l.edge_height_min);
    s.field("edge_height_max", l.edge_height_max);
    s.field("curl_min", l.curl_min);
    s.field("curl_max", l.curl_max);
    s.field("rock_radial_min", l.rock_radial_min);
    s.field("t6", l.t6);
    s.field("p5", l.p5);
    s.field("randomize_soil", l.randomize_soil);
  });
  v.section("curriculum", [&](V& s) {
    s.field("window", c.curriculum.window);
    s.field("threshold", c.curriculum.threshold);
    s.field("start_level", c.curriculum.start_level);
    s.field("pinned_level", c.curriculum.pinned_level);
  });
  v.section("observation", [&](V& s) {
    auto& r = c.ranges;
    s.field("torque_scale", r.torque_scale);
    s.field("bucket_min", r.bucket_min);
    s.field("bucket_max", r.bucket_max);
    s.field("bucket_speed", r.bucket_speed);
    s.field("bucket_rate", r.bucket_rate);
    s.field("rock_min", r.rock_min);
    s.field("rock_max", r.rock_max);
  });
  v.section("randomization", [&](V& s) {
    s.field("mass_scale_min", c.mass_scale_min);
    s.field("mass_scale_max", c.mass_scale_max);
    s.field("friction_min", c.friction_min);
    s.field("friction_max", c.friction_max);
  });
  v.section("rocks", [&](V& s) {
    s.field("split", c.split);
    s.field("size", c.rock_size);
  });
}

}  // namespace

std::array<LevelSpec, kNumLevels> EnvConfig::default_levels() {
  std::array<LevelSpec, kNumLevels> l;
  // Level 0: rock in a 2.5 x 0.6 x 0.4 m box ahead of the edge, soft soil, no angle-of-attack check.
  l[0].t6 = false;
  // Level 1: angle-of-attack termination on.
  l[1] = l[0];
  l[1].t6 = true;
  // Level 2: randomized soil.
  l[2] = l[1];
  l[2].randomize_soil = true;
  // Level 3: 4.5 x 3 x 0.4 m volume, bucket placement widened.
  l[3] = l[2];
  l[3].ahead_min = 0.3;
  l[3].ahead_max = 4.8;
  l[3].lateral_half = 1.5;
  l[3].edge_radial_min = 5.0;
  l[3].edge_radial_max = 6.8;
  // Level 4: misaligned-digging penalty, wider longitudinal placement.
  l[4] = l[3];
  l[4].p5 = true;
  l[4].edge_radial_min = 4.5;
  l[4].rock_radial_min = 2.6;
  return l;
}

void EnvConfig::validate() const {
  arm.validate();
  if (!(control_dt > 0.0) || substeps < 1) throw DomainError("config: control_dt and substeps must be positive");
  if (!(max_delay >= 0.0)) throw DomainError("config: max_delay must be non-negative");
  if (history < 1 || history * control_dt < max_delay - 1e-9)
    throw DomainError("config: history * control_dt must cover max_delay");
  if (!(turn_deadband >= 0.0)) throw DomainError("config: turn_deadband must be non-negative");
  if (!(machine_mass > 0.0)) throw DomainError("config: machine_mass must be positive");
  soft.validate();
  hard.validate();
  sensor.validate();
  if (curriculum.window < 1 || !(curriculum.threshold > 0.0 && curriculum.threshold < 1.0))
    throw DomainError("config: curriculum window/threshold");
  if (curriculum.start_level < 0 || curriculum.start_level >= kNumLevels || curriculum.pinned_level >= kNumLevels)
    throw DomainError("config: curriculum level out of range");
  for (const auto& l : levels) {
    if (!(l.ahead_min <= l.ahead_max && l.edge_radial_min <= l.edge_radial_max &&
          l.edge_height_min <= l.edge_height_max && l.curl_min <= l.curl_max && l.turn_min <= l.turn_max &&
          l.lateral_half >= 0.0 && l.height > 0.0))
      throw DomainError("config: empty level sampling interval");
  }
  if (!(rewards.d_hard > rewards.d_soft) || !(rewards.y_max > rewards.y_min))
    throw DomainError("config: P5 bounds must be increasing");
  if (!(mass_scale_min > 0.0 && mass_scale_min <= mass_scale_max)) throw DomainError("config: mass scale range");
  if (!(friction_min >= 0.0 && friction_min <= friction_max)) throw DomainError("config: friction range");
  if (!(cutting_resistance_min > 0.0 && cutting_resistance_min <= cutting_resistance_max))
    throw DomainError("config: cutting resistance range");
  for (int a = 0; a < 3; ++a) {
    if (!(ranges.bucket_max[a] > ranges.bucket_min[a]) || !(ranges.rock_max[a] > ranges.rock_min[a]))
      throw DomainError("config: empty observation range");
  }
}

EnvConfig config_from_yaml(const std::string& text) {
  EnvConfig cfg;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw DomainError(std::string("config: parse error: ") + e.what());
  }
  {
    Reader r(root, "");
    visit(r, cfg);
  }
  cfg.validate();
  return cfg;
}

EnvConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_yaml(ss.str());
}

std::string config_to_yaml(const EnvConfig& cfg) {
  EnvConfig copy = cfg;
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  Writer w(out);
  visit(w, copy);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void save_config(const EnvConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config " + path.string());
  out << config_to_yaml(cfg);
}

std::uint64_t config_hash(const EnvConfig& cfg) { return fnv1a(config_to_yaml(cfg)); }

const char* to_string(SoilMode m) {
  switch (m) {
    case SoilMode::Soft: return "soft";
    case SoilMode::Hard: return "hard";
    default: return "curriculum";
  }
}

const char* to_string(RockSize s) {
  switch (s) {
    case RockSize::Small: return "small";
    case RockSize::Large: return "large";
    default: return "any";
  }
}

SoilMode soil_mode_from_string(const std::string& s) {
  if (s == "soft") return SoilMode::Soft;
  if (s == "hard") return SoilMode::Hard;
  if (s == "curriculum") return SoilMode::Curriculum;
  throw DomainError("unknown soil mode '" + s + "'");
}

RockSize rock_size_from_string(const std::string& s) {
  if (s == "any") return RockSize::Any;
  if (s == "small") return RockSize::Small;
  if (s == "large" || s == "big") return RockSize::Large;
  throw DomainError("unknown rock size '" + s + "'");
}

}  // namespace boulder
