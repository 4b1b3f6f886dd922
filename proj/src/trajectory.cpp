#include "boulder/trajectory.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace boulder::traj {

using nlohmann::json;

namespace {

const char* kJointNames[arm::kNumJoints] = {"turn", "boom", "stick", "tele", "pitch"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Vec3 roll_pitch_yaw(const Mat3& r) {
  const Vec3 ypr = r.eulerAngles(2, 1, 0);
  return {ypr[2], ypr[1], ypr[0]};
}

json soil_json(const soil::SoilParams& s) {
  return {{"cohesion", s.cohesion},
          {"friction_angle", s.friction_angle},
          {"unit_weight", s.unit_weight},
          {"metal_friction_angle", s.metal_friction_angle},
          {"cavity_expansion", s.cavity_expansion},
          {"adhesion_ratio", s.adhesion_ratio},
          {"cutting_resistance", s.cutting_resistance},
          {"surface_height", s.surface_height}};
}

soil::SoilParams soil_from(const json& j) {
  soil::SoilParams s;
  s.cohesion = j.at("cohesion");
  s.friction_angle = j.at("friction_angle");
  s.unit_weight = j.at("unit_weight");
  s.metal_friction_angle = j.at("metal_friction_angle");
  s.cavity_expansion = j.at("cavity_expansion");
  s.adhesion_ratio = j.at("adhesion_ratio");
  s.cutting_resistance = j.at("cutting_resistance");
  s.surface_height = j.at("surface_height");
  return s;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".json");
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::vector<std::string> csv_columns() {
  std::vector<std::string> c{"t"};
  for (const char* prefix : {"q_", "qd_", "tau_"})
    for (const char* j : kJointNames) c.push_back(std::string(prefix) + j);
  for (const char* n : {"bucket_x", "bucket_y", "bucket_z", "bucket_roll", "bucket_pitch", "bucket_yaw", "rock_x",
                        "rock_y", "rock_z"})
    c.emplace_back(n);
  for (const char* n : env::kRewardTermNames) c.emplace_back(n);
  c.emplace_back("termination");
  for (int i = 0; i < arm::kNumJoints; ++i) c.push_back("a" + std::to_string(i));
  for (const char* n : {"depth", "edge_radial", "edge_height", "rock_hits", "cloud_valid"}) c.emplace_back(n);
  for (int i = 0; i < sensor::kCloudSize; ++i)
    for (const char* axis : {"x", "y", "z"}) c.push_back("p" + std::to_string(i) + "_" + axis);
  return c;
}

void write_trajectory(const std::filesystem::path& path, const env::Environment& env) {
  const auto& records = env.records();
  if (records.empty()) throw std::logic_error("write_trajectory: environment has no recorded steps");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  const auto cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) f << (i ? "," : "") << cols[i];
  f << "\n";
  for (const auto& r : records) {
    std::string line = num(r.time);
    for (const auto* v : {&r.q, &r.qd, &r.tau})
      for (int i = 0; i < arm::kNumJoints; ++i) line += "," + num((*v)[i]);
    const Vec3 p = r.bucket_base.translation();
    const Vec3 rpy = roll_pitch_yaw(r.bucket_base.linear());
    for (int i = 0; i < 3; ++i) line += "," + num(p[i]);
    for (int i = 0; i < 3; ++i) line += "," + num(rpy[i]);
    for (int i = 0; i < 3; ++i) line += "," + num(r.rock_position[i]);
    for (double v : r.terms.values) line += "," + num(v);
    line += std::string(",") + env::to_string(r.cause);
    for (int i = 0; i < arm::kNumJoints; ++i) line += "," + num(r.action[i]);
    line += "," + num(r.edge_depth) + "," + num(r.edge_radial) + "," + num(r.edge_height);
    line += "," + std::to_string(r.rock_hits) + "," + (r.cloud.valid ? "1" : "0");
    for (const auto& pt : r.cloud.points)
      for (int i = 0; i < 3; ++i) line += "," + num(pt[i]);
    f << line << "\n";
  }

  const env::EpisodeInit& in = env.init();
  const auto& ctx = env.context();
  json j = {{"level", in.level},
            {"entry", in.entry},
            {"rock", in.rock},
            {"rock_name", ctx.rocks.rocks[in.rock].spec.name},
            {"q", std::vector<double>(in.q.data(), in.q.data() + arm::kNumJoints)},
            {"rock_position", {in.rock_position.x(), in.rock_position.y(), in.rock_position.z()}},
            {"rock_orientation",
             {in.rock_orientation.w(), in.rock_orientation.x(), in.rock_orientation.y(), in.rock_orientation.z()}},
            {"delay", in.delay},
            {"mass_scale", in.mass_scale},
            {"friction", in.friction},
            {"soil", soil_json(in.soil)},
            {"t6", in.flags.t6},
            {"p5", in.flags.p5},
            {"noise_seed", in.noise_seed},
            {"config_hash", config_hash(ctx.cfg)},
            {"dataset_hash", ctx.rocks.dataset_hash},
            {"config", config_to_yaml(ctx.cfg)}};
  std::ofstream s(sidecar_path(path));
  if (!s) throw std::runtime_error("cannot write " + sidecar_path(path).string());
  s << j.dump(1) << "\n";
}

Trajectory from_environment(const env::Environment& env) {
  Trajectory log;
  log.init = env.init();
  const auto& ctx = env.context();
  log.rock_name = ctx.rocks.rocks[log.init.rock].spec.name;
  log.config_hash = config_hash(ctx.cfg);
  log.dataset_hash = ctx.rocks.dataset_hash;
  log.config_yaml = config_to_yaml(ctx.cfg);
  for (const auto& r : env.records()) {
    Row row;
    row.t = r.time;
    row.q = r.q;
    row.qd = r.qd;
    row.tau = r.tau;
    row.bucket = r.bucket_base.translation();
    row.bucket_rpy = roll_pitch_yaw(r.bucket_base.linear());
    row.rock = r.rock_position;
    row.terms = r.terms;
    row.cause = r.cause;
    row.action = r.action;
    row.has_extras = true;
    row.depth = r.edge_depth;
    row.edge_radial = r.edge_radial;
    row.edge_height = r.edge_height;
    row.rock_hits = r.rock_hits;
    log.rows.push_back(row);
  }
  return log;
}

Trajectory read_trajectory(const std::filesystem::path& path, bool require_sidecar) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open trajectory " + path.string());
  Trajectory log;
  std::string line;
  if (!std::getline(f, line) || line.empty()) throw ParseError(path.string() + ":1: empty trajectory log");
  const auto header = split(line);
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = static_cast<int>(i);
  auto col = [&](const std::string& name) -> int {
    const auto it = index.find(name);
    return it == index.end() ? -1 : it->second;
  };
  for (const char* required : {"t", "bucket_x", "bucket_y", "bucket_z"})
    if (col(required) < 0) throw ParseError(path.string() + ":1: missing column '" + required + "'");
  const bool extras = col("depth") >= 0 && col("edge_radial") >= 0 && col("edge_height") >= 0;

  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (cells.size() != header.size())
      throw ParseError(where + "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
    auto value = [&](int c) {
      if (c < 0) return 0.0;
      const std::string& s = cells[c];
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size()) throw ParseError(where + "bad number '" + s + "' in column " + header[c]);
      return v;
    };
    Row r;
    r.t = value(col("t"));
    for (int i = 0; i < arm::kNumJoints; ++i) {
      r.q[i] = value(col(std::string("q_") + kJointNames[i]));
      r.qd[i] = value(col(std::string("qd_") + kJointNames[i]));
      r.tau[i] = value(col(std::string("tau_") + kJointNames[i]));
      r.action[i] = value(col("a" + std::to_string(i)));
    }
    r.bucket = {value(col("bucket_x")), value(col("bucket_y")), value(col("bucket_z"))};
    r.bucket_rpy = {value(col("bucket_roll")), value(col("bucket_pitch")), value(col("bucket_yaw"))};
    r.rock = {value(col("rock_x")), value(col("rock_y")), value(col("rock_z"))};
    for (int k = 0; k < env::kNumRewardTerms; ++k) r.terms.values[k] = value(col(env::kRewardTermNames[k]));
    if (const int c = col("termination"); c >= 0) {
      try {
        r.cause = env::termination_from_string(cells[c]);
      } catch (const DomainError&) {
        throw ParseError(where + "unknown termination '" + cells[c] + "'");
      }
    }
    if (extras) {
      r.has_extras = true;
      r.depth = value(col("depth"));
      r.edge_radial = value(col("edge_radial"));
      r.edge_height = value(col("edge_height"));
      r.rock_hits = static_cast<int>(value(col("rock_hits")));
    }
    log.rows.push_back(r);
  }
  if (log.rows.empty()) throw ParseError(path.string() + ":2: trajectory log has no rows");

  const auto side = sidecar_path(path);
  if (!std::filesystem::exists(side)) {
    if (require_sidecar) throw ParseError("missing sidecar " + side.string());
    return log;
  }
  try {
    std::ifstream s(side);
    const json j = json::parse(s);
    env::EpisodeInit& in = log.init;
    in.level = j.at("level");
    in.entry = j.at("entry");
    in.rock = j.at("rock");
    const auto q = j.at("q").get<std::vector<double>>();
    if (q.size() != arm::kNumJoints) throw ParseError(side.string() + ": q must have 5 entries");
    for (int i = 0; i < arm::kNumJoints; ++i) in.q[i] = q[i];
    const auto p = j.at("rock_position").get<std::vector<double>>();
    const auto o = j.at("rock_orientation").get<std::vector<double>>();
    if (p.size() != 3 || o.size() != 4) throw ParseError(side.string() + ": bad rock pose");
    in.rock_position = {p[0], p[1], p[2]};
    in.rock_orientation = Quat(o[0], o[1], o[2], o[3]);
    in.delay = j.at("delay");
    in.mass_scale = j.at("mass_scale");
    in.friction = j.at("friction");
    in.soil = soil_from(j.at("soil"));
    in.flags.t6 = j.at("t6");
    in.flags.p5 = j.at("p5");
    in.noise_seed = j.at("noise_seed");
    log.rock_name = j.value("rock_name", "");
    log.config_hash = j.value("config_hash", std::uint64_t{0});
    log.dataset_hash = j.value("dataset_hash", std::uint64_t{0});
    log.config_yaml = j.value("config", "");
  } catch (const json::exception& e) {
    throw ParseError(side.string() + ": " + e.what());
  }
  return log;
}

ReplayReport replay(std::shared_ptr<const env::Context> ctx, const Trajectory& log) {
  if (log.dataset_hash != 0 && log.dataset_hash != ctx->rocks.dataset_hash)
    throw std::runtime_error("replay: trajectory was recorded with a different rock dataset");
  env::Environment e(ctx, 0);
  e.reset(log.init);
  ReplayReport rep;
  for (std::size_t k = 1; k < log.rows.size(); ++k) {
    if (e.done()) {
      ++rep.mismatches;
      if (rep.first_mismatch < 0) {
        rep.first_mismatch = static_cast<int>(k);
        rep.detail = "episode ended before the log did";
      }
      break;
    }
    const auto r = e.step(log.rows[k].action);
    ++rep.steps;
    bool same = r.cause == log.rows[k].cause;
    std::string what = same ? "" : "termination";
    for (int t = 0; t < env::kNumRewardTerms && same; ++t) {
      if (r.terms.values[t] != log.rows[k].terms.values[t]) {
        same = false;
        what = env::kRewardTermNames[t];
      }
    }
    if (!same) {
      ++rep.mismatches;
      if (rep.first_mismatch < 0) {
        rep.first_mismatch = static_cast<int>(k);
        rep.detail = "step " + std::to_string(k) + ": " + what + " differs";
      }
    }
  }
  return rep;
}

namespace {

struct PathPoint {
  double radial;
  double height;
  bool in_soil;
};

std::vector<PathPoint> edge_path(const Trajectory& log) {
  std::vector<PathPoint> out;
  for (const auto& r : log.rows) {
    if (r.has_extras) {
      out.push_back({r.edge_radial, r.edge_height, r.depth > 0.0});
    } else {
      // Without the edge columns the bucket origin stands in for the edge.
      const double h = r.bucket.z();
      out.push_back({std::hypot(r.bucket.x(), r.bucket.y()), h, h < 0.0});
    }
  }
  return out;
}

}  // namespace

double in_soil_path(const Trajectory& log) {
  const auto path = edge_path(log);
  double total = 0.0;
  for (std::size_t k = 1; k < path.size(); ++k)
    if (path[k].in_soil && path[k - 1].in_soil) total += std::abs(path[k].radial - path[k - 1].radial);
  return total;
}

PlotResult plot_paths(const Trajectory& a, const std::string& label_a, const Trajectory& b, const std::string& label_b,
                      const std::filesystem::path& svg) {
  PlotResult res;
  res.path_a = in_soil_path(a);
  res.path_b = in_soil_path(b);
  res.ratio = res.path_b > 0.0 ? res.path_a / res.path_b : (res.path_a > 0.0 ? INFINITY : 1.0);

  // Horizontal axis: distance travelled toward the cabin from the first soil contact.
  std::vector<std::vector<Vec2>> curves;
  for (const Trajectory* t : {&a, &b}) {
    const auto path = edge_path(*t);
    double origin = path.front().radial;
    for (const auto& p : path)
      if (p.in_soil) {
        origin = p.radial;
        break;
      }
    std::vector<Vec2> c;
    for (const auto& p : path) c.emplace_back(origin - p.radial, p.height);
    curves.push_back(std::move(c));
  }
  Eigen::AlignedBox2d box(Vec2(0.0, 0.0));
  for (const auto& c : curves)
    for (const auto& p : c) box.extend(p);
  const Vec2 pad(0.2, 0.1);
  box.extend(box.min() - pad);
  box.extend(box.max() + pad);
  const double W = 720, H = 420, M = 50;
  auto sx = [&](double x) { return M + (x - box.min().x()) / box.sizes().x() * (W - 2 * M); };
  auto sy = [&](double y) { return H - M - (y - box.min().y()) / box.sizes().y() * (H - 2 * M); };

  if (svg.has_parent_path()) std::filesystem::create_directories(svg.parent_path());
  std::ofstream f(svg);
  if (!f) throw std::runtime_error("cannot write " + svg.string());
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f << "<line x1=\"" << M << "\" y1=\"" << sy(0) << "\" x2=\"" << W - M << "\" y2=\"" << sy(0)
    << "\" stroke=\"#8b5a2b\" stroke-width=\"2\" stroke-dasharray=\"6,4\"/>\n";
  f << "<text x=\"" << W - M - 60 << "\" y=\"" << sy(0) - 6 << "\" fill=\"#8b5a2b\">soil</text>\n";
  const char* colors[2] = {"#c0392b", "#2471a3"};
  const std::string labels[2] = {label_a, label_b};
  const double paths[2] = {res.path_a, res.path_b};
  for (int k = 0; k < 2; ++k) {
    f << "<polyline fill=\"none\" stroke=\"" << colors[k] << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : curves[k]) f << sx(p.x()) << "," << sy(p.y()) << " ";
    f << "\"/>\n";
    char legend[160];
    std::snprintf(legend, sizeof(legend), "%s: in-soil path %.2f m", labels[k].c_str(), paths[k]);
    f << "<text x=\"" << M + 10 << "\" y=\"" << M + 16 * k << "\" fill=\"" << colors[k] << "\">" << legend << "</text>\n";
  }
  char ratio[96];
  std::snprintf(ratio, sizeof(ratio), "ratio %.3f", res.ratio);
  f << "<text x=\"" << M + 10 << "\" y=\"" << M + 32 << "\">" << ratio << "</text>\n";
  f << "<text x=\"" << W / 2 - 120 << "\" y=\"" << H - 12 << "\">edge travel toward the cabin [m]</text>\n";
  f << "<text x=\"14\" y=\"" << H / 2 << "\" transform=\"rotate(-90 14 " << H / 2 << ")\">edge height above soil [m]</text>\n";
  f << "</svg>\n";
  return res;
}

}  // namespace boulder::traj
