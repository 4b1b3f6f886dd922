#include "boulder/rockgen.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace boulder::rockgen {

using nlohmann::json;

const char* to_string(SizeClass c) { return c == SizeClass::Small ? "small" : "large"; }
const char* to_string(Split s) { return s == Split::Train ? "train" : "held_out"; }

SizeClass size_class_from_string(const std::string& s) {
  if (s == "small") return SizeClass::Small;
  if (s == "large") return SizeClass::Large;
  throw DomainError("unknown size class: " + s);
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "held_out") return Split::HeldOut;
  throw DomainError("unknown split: " + s);
}

void RockSpec::validate() const {
  const double tol = 1e-12;
  if (extents.x() < 0.3 - tol || extents.x() > 1.0 + tol) throw DomainError("rock x extent outside [0.3, 1.0]");
  if (extents.y() < 0.1 - tol || extents.y() > 0.5 + tol) throw DomainError("rock y extent outside [0.1, 0.5]");
  if (extents.z() < 0.2 - tol || extents.z() > 0.7 + tol) throw DomainError("rock z extent outside [0.2, 0.7]");
  if (mass_scale < 0.9 - tol || mass_scale > 1.1 + tol) throw DomainError("mass scale outside [0.9, 1.1]");
  if (friction < 0.35 - tol || friction > 0.6 + tol) throw DomainError("friction outside [0.35, 0.6]");
  if (!(density > 0.0)) throw DomainError("density must be positive");
  if (noise < 0.0 || noise >= 1.0) throw DomainError("noise amplitude outside [0, 1)");
}

physics::RockBody Rock::body(double mass_scale, double friction) const {
  physics::RockBody b;
  b.mesh = mesh;
  b.mass = props.mass * mass_scale;
  b.inertia_body = props.inertia * mass_scale;
  b.friction = friction >= 0.0 ? friction : spec.friction;
  return b;
}

Rock rock_from_mesh(ConvexMesh mesh, const RockSpec& spec) {
  const MassProperties raw = mass_properties(mesh, spec.density);
  // Already-centered meshes (e.g. reloaded from disk) are left untouched so reloads are exact.
  if (raw.com.norm() > 1e-12) mesh.translate(-raw.com);
  Rock rock;
  rock.spec = spec;
  rock.props = mass_properties(mesh, spec.density);
  rock.props.mass *= spec.mass_scale;
  rock.props.inertia *= spec.mass_scale;
  rock.mesh = std::make_shared<const ConvexMesh>(std::move(mesh));
  return rock;
}

Rock generate_rock_from_points(std::span<const Vec3> points, const RockSpec& spec) {
  if (!(spec.extents.minCoeff() > 0.0)) throw DomainError("rock extents must be positive");
  ConvexMesh hull = convex_hull(points);
  Eigen::AlignedBox3d box;
  for (const auto& v : hull.vertices) box.extend(v);
  const Vec3 size = box.sizes();
  if (!(size.minCoeff() > 0.0)) throw DomainError("rock hull is flat");
  hull.translate(-box.center());
  hull.scale(spec.extents.cwiseQuotient(size));
  return rock_from_mesh(std::move(hull), spec);
}

Rock generate_rock(const RockSpec& spec) {
  spec.validate();
  constexpr int kAttempts = 16;
  constexpr int kLobes = 3;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Rng rng(mix_seed(spec.seed, attempt));
    std::normal_distribution<double> gauss;
    const int n = std::uniform_int_distribution<int>(40, 80)(rng);

    std::array<Vec3, kLobes> dirs;
    std::array<double, kLobes> freq, phase, weight;
    double weight_sum = 0.0;
    for (int k = 0; k < kLobes; ++k) {
      dirs[k] = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized();
      freq[k] = uniform(rng, 1.0, 2.5);
      phase[k] = uniform(rng, 0.0, 2.0 * kPi);
      weight[k] = uniform(rng, 0.5, 1.0);
      weight_sum += weight[k];
    }

    std::vector<Vec3> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) {
      Vec3 u(gauss(rng), gauss(rng), gauss(rng));
      if (u.norm() < 1e-12) u = Vec3::UnitZ();
      u.normalize();
      double bump = 0.0;
      for (int k = 0; k < kLobes; ++k) bump += weight[k] * std::sin(freq[k] * kPi * dirs[k].dot(u) + phase[k]);
      pts.push_back((1.0 + spec.noise * bump / weight_sum) * u);
    }
    try {
      return generate_rock_from_points(pts, spec);
    } catch (const DomainError&) {
      continue;
    }
  }
  throw DomainError("rock generation failed for seed " + std::to_string(spec.seed));
}

RockSpec sample_spec(SizeClass size, std::uint64_t seed, double noise) {
  Rng rng(mix_seed(seed, 0xC1A55));
  RockSpec s;
  s.seed = seed;
  s.size = size;
  s.noise = noise;
  const double x = size == SizeClass::Small ? uniform(rng, 0.3, 0.5) : uniform(rng, 0.8, 1.0);
  const double y = uniform(rng, 0.1, std::min(0.5, x));
  const double z = uniform(rng, 0.2, std::min(0.7, x));
  s.extents = Vec3(x, y, z);
  s.friction = uniform(rng, 0.35, 0.6);
  return s;
}

Dataset sample_dataset(const DatasetOptions& options, std::uint64_t seed) {
  if (options.train < 2) throw DomainError("dataset needs at least two training rocks");
  if (options.held_out < 0) throw DomainError("held-out count must be non-negative");
  if (options.small_fraction < 0.0 || options.small_fraction > 1.0) throw DomainError("small fraction outside [0, 1]");
  Dataset d;
  const int n_small = static_cast<int>(std::lround(options.small_fraction * options.train));
  char name[64];
  for (int i = 0; i < options.train; ++i) {
    const SizeClass c = i < n_small ? SizeClass::Small : SizeClass::Large;
    RockSpec s = sample_spec(c, mix_seed(seed, static_cast<std::uint64_t>(i)), options.noise);
    s.split = Split::Train;
    std::snprintf(name, sizeof(name), "train_%03d_%s", i, to_string(c));
    s.name = name;
    d.train.push_back(s);
  }
  // Held-out streams start far past any realistic training count, so seeds never collide.
  for (int i = 0; i < options.held_out; ++i) {
    RockSpec s = sample_spec(options.held_out_class, mix_seed(seed, (1ull << 40) + i), options.noise);
    s.split = Split::HeldOut;
    std::snprintf(name, sizeof(name), "heldout_%03d_%s", i, to_string(options.held_out_class));
    s.name = name;
    d.held_out.push_back(s);
  }
  return d;
}

std::vector<RockSpec> Dataset::all() const {
  std::vector<RockSpec> out = train;
  out.insert(out.end(), held_out.begin(), held_out.end());
  return out;
}

std::uint64_t Dataset::hash() const {
  std::uint64_t h = fnv1a("rock-dataset-v1");
  for (const auto& s : all()) {
    h = fnv1a(&s.seed, sizeof(s.seed), h);
    h = fnv1a(s.extents.data(), 3 * sizeof(double), h);
    h = fnv1a(&s.density, sizeof(double), h);
    h = fnv1a(&s.mass_scale, sizeof(double), h);
    h = fnv1a(&s.friction, sizeof(double), h);
    h = fnv1a(&s.noise, sizeof(double), h);
    h = fnv1a(std::string(to_string(s.size)), h);
    h = fnv1a(std::string(to_string(s.split)), h);
    h = fnv1a(s.name, h);
  }
  return h;
}

void write_obj(const ConvexMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ConvexMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  ConvexMesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      Triangle t;
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        if (!(ls >> tok)) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad face");
        t[k] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
      }
      mesh.faces.push_back(t);
    }
  }
  for (const auto& f : mesh.faces) {
    for (int idx : f) {
      if (idx < 0 || idx >= static_cast<int>(mesh.vertices.size())) {
        throw std::runtime_error(path.string() + ": face index out of range");
      }
    }
  }
  mesh.update_planes();
  return mesh;
}

namespace {

json spec_to_json(const RockSpec& s) {
  return json{{"name", s.name},
              {"seed", s.seed},
              {"extents", {s.extents.x(), s.extents.y(), s.extents.z()}},
              {"density", s.density},
              {"mass_scale", s.mass_scale},
              {"friction", s.friction},
              {"class", to_string(s.size)},
              {"split", to_string(s.split)},
              {"noise", s.noise}};
}

RockSpec spec_from_json(const json& j) {
  RockSpec s;
  s.name = j.at("name").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  const auto e = j.at("extents");
  s.extents = Vec3(e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>());
  s.density = j.at("density").get<double>();
  s.mass_scale = j.at("mass_scale").get<double>();
  s.friction = j.at("friction").get<double>();
  s.size = size_class_from_string(j.at("class").get<std::string>());
  s.split = split_from_string(j.at("split").get<std::string>());
  s.noise = j.at("noise").get<double>();
  return s;
}

}  // namespace

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  json manifest;
  manifest["version"] = 1;
  manifest["hash"] = dataset.hash();
  manifest["rocks"] = json::array();
  for (const auto& spec : dataset.all()) {
    const Rock rock = generate_rock(spec);
    write_obj(*rock.mesh, dir / (spec.name + ".obj"));
    json meta = spec_to_json(spec);
    meta["mesh"] = spec.name + ".obj";
    meta["volume"] = rock.props.volume;
    meta["mass"] = rock.props.mass;
    meta["inertia"] = {rock.props.inertia(0, 0), rock.props.inertia(1, 1), rock.props.inertia(2, 2),
                       rock.props.inertia(0, 1), rock.props.inertia(0, 2), rock.props.inertia(1, 2)};
    meta["vertices"] = rock.mesh->vertices.size();
    meta["faces"] = rock.mesh->faces.size();
    std::ofstream out(dir / (spec.name + ".json"));
    if (!out) throw std::runtime_error("cannot write metadata for " + spec.name);
    out << meta.dump(2) << '\n';
    manifest["rocks"].push_back(spec_to_json(spec));
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: manifest.json");
}

Dataset read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("missing manifest.json in " + dir.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest: " + std::string(e.what()));
  }
  Dataset d;
  for (const auto& j : manifest.at("rocks")) {
    const RockSpec s = spec_from_json(j);
    (s.split == Split::Train ? d.train : d.held_out).push_back(s);
  }
  if (manifest.contains("hash") && manifest["hash"].get<std::uint64_t>() != d.hash()) {
    throw std::runtime_error("manifest hash does not match its rock list");
  }
  return d;
}

Rock load_rock(const std::filesystem::path& dir, const RockSpec& spec) {
  return rock_from_mesh(read_obj(dir / (spec.name + ".obj")), spec);
}

}  // namespace boulder::rockgen
