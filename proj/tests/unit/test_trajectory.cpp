#include "doctest.h"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "boulder/scripted.hpp"
#include "boulder/trajectory.hpp"

using namespace boulder;
using namespace boulder::env;

namespace {

std::shared_ptr<Context> small_context() {
  EnvConfig cfg;
  rockgen::DatasetOptions opt;
  opt.train = 6;
  opt.held_out = 2;
  auto lib = RockLibrary::build(rockgen::sample_dataset(opt, 5), rockgen::Split::Train);
  auto ctx = std::make_shared<Context>(cfg, lib);
  ctx->set_cache(populate_reset_cache(ctx->cfg, ctx->rocks, 0, 4, 9));
  return ctx;
}

std::filesystem::path tmp(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

std::vector<std::string> lines_of(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::vector<std::string> out;
  std::string l;
  while (std::getline(f, l)) out.push_back(l);
  return out;
}

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
  std::ofstream f(p);
  for (const auto& l : lines) f << l << "\n";
}

// Row with only the edge columns filled, for path-length checks.
traj::Row edge_row(double radial, double height) {
  traj::Row r;
  r.has_extras = true;
  r.edge_radial = radial;
  r.edge_height = height;
  r.depth = -height;
  return r;
}

}  // namespace

TEST_CASE("trajectory round trip and replay") {
  auto ctx = small_context();
  Environment e(ctx, 3);
  e.set_recording(true);
  e.reset(0);
  // The out-of-range first action exercises clipping: the raw action must replay identically.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  int steps = 0;
  while (!e.done() && steps < 30) {
    arm::JointVector a;
    for (int i = 0; i < 5; ++i) a[i] = u(rng);
    if (steps == 0) a[4] = 1.4;
    e.step(a);
    ++steps;
  }
  const auto path = tmp("boulder_traj_test.csv");
  traj::write_trajectory(path, e);

  const auto cols = traj::csv_columns();
  const auto text = lines_of(path);
  REQUIRE(text.size() == e.records().size() + 1);
  REQUIRE(steps >= 10);
  CHECK(e.records()[1].action[4] == 1.4);
  CHECK(text.front().substr(0, 8) == "t,q_turn");

  const auto log = traj::read_trajectory(path);
  REQUIRE(log.rows.size() == e.records().size());
  CHECK(log.dataset_hash == ctx->rocks.dataset_hash);
  CHECK(log.config_hash == config_hash(ctx->cfg));
  for (std::size_t k = 0; k < log.rows.size(); ++k) {
    const auto& rec = e.records()[k];
    CHECK(log.rows[k].action == rec.action);
    CHECK(log.rows[k].q == rec.q);
    CHECK(log.rows[k].cause == rec.cause);
    for (int t = 0; t < kNumRewardTerms; ++t) CHECK(log.rows[k].terms.values[t] == rec.terms.values[t]);
  }
  CHECK(log.init.noise_seed == e.init().noise_seed);
  CHECK(log.init.q == e.init().q);

  const auto mem = traj::from_environment(e);
  REQUIRE(mem.rows.size() == log.rows.size());
  for (std::size_t k = 0; k < log.rows.size(); ++k) {
    CHECK(mem.rows[k].bucket == log.rows[k].bucket);
    CHECK(mem.rows[k].bucket_rpy == log.rows[k].bucket_rpy);
    CHECK(mem.rows[k].depth == log.rows[k].depth);
    CHECK(mem.rows[k].edge_radial == log.rows[k].edge_radial);
  }
  CHECK(traj::in_soil_path(mem) == traj::in_soil_path(log));

  const auto rep = traj::replay(ctx, log);
  CHECK(rep.identical());
  CHECK(rep.steps == steps);

  SUBCASE("a perturbed action is detected") {
    auto bad = log;
    bad.rows[1].action = -bad.rows[1].action;
    const auto r = traj::replay(ctx, bad);
    CHECK_FALSE(r.identical());
    CHECK(r.first_mismatch >= 1);
  }

  SUBCASE("missing sidecar") {
    const auto copy = tmp("boulder_traj_nosidecar.csv");
    std::filesystem::copy_file(path, copy, std::filesystem::copy_options::overwrite_existing);
    std::filesystem::remove(copy.string() + ".json");
    CHECK_THROWS_AS(traj::read_trajectory(copy), traj::ParseError);
    CHECK(traj::read_trajectory(copy, false).rows.size() == log.rows.size());
    std::filesystem::remove(copy);
  }

  SUBCASE("malformed rows report the line number") {
    const auto broken = tmp("boulder_traj_broken.csv");
    auto l = text;
    l[4] = l[4].substr(0, l[4].rfind(','));
    write_lines(broken, l);
    try {
      traj::read_trajectory(broken, false);
      FAIL("expected a parse error");
    } catch (const traj::ParseError& err) {
      CHECK(std::string(err.what()).find(":5:") != std::string::npos);
    }
    l = text;
    l[3].replace(0, l[3].find(','), "abc");
    write_lines(broken, l);
    CHECK_THROWS_AS(traj::read_trajectory(broken, false), traj::ParseError);
    write_lines(broken, {});
    CHECK_THROWS_AS(traj::read_trajectory(broken, false), traj::ParseError);
    std::filesystem::remove(broken);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".json");
}

TEST_CASE("in-soil path sums horizontal travel below the surface") {
  traj::Trajectory t;
  // Above, enters, drags 0.3 m, then leaves and moves again above the soil.
  for (auto [r, h] : std::vector<std::pair<double, double>>{
           {5.0, 0.2}, {4.9, 0.05}, {4.8, -0.05}, {4.6, -0.1}, {4.5, -0.1}, {4.4, 0.1}, {4.0, 0.5}})
    t.rows.push_back(edge_row(r, h));
  CHECK(traj::in_soil_path(t) == doctest::Approx(0.3).epsilon(1e-12));

  // Property: the path never exceeds the total horizontal travel and is invariant to the sign of
  // radial motion.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> step(-0.1, 0.1), height(-0.2, 0.2);
  for (int n = 0; n < 100; ++n) {
    traj::Trajectory a, b;
    double r = 5.0, total = 0.0, expect = 0.0, prev_h = height(rng);
    a.rows.push_back(edge_row(r, prev_h));
    b.rows.push_back(edge_row(-r, prev_h));
    for (int k = 0; k < 50; ++k) {
      const double d = step(rng), h = height(rng);
      r += d;
      total += std::abs(d);
      if (h < 0 && prev_h < 0) expect += std::abs(d);
      a.rows.push_back(edge_row(r, h));
      b.rows.push_back(edge_row(-r, h));
      prev_h = h;
    }
    CHECK(traj::in_soil_path(a) <= total + 1e-12);
    CHECK(traj::in_soil_path(a) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(traj::in_soil_path(a) == doctest::Approx(traj::in_soil_path(b)).epsilon(1e-12));
  }
}

TEST_CASE("plot writes an svg and the path ratio") {
  traj::Trajectory a, b;
  for (int k = 0; k < 10; ++k) {
    a.rows.push_back(edge_row(5.0 - 0.1 * k, k ? -0.1 : 0.1));
    b.rows.push_back(edge_row(5.0 - 0.05 * k, k ? -0.1 : 0.1));
  }
  const auto svg = tmp("boulder_plot_test.svg");
  const auto res = traj::plot_paths(a, "hard", b, "soft", svg);
  CHECK(res.path_a == doctest::Approx(0.8));
  CHECK(res.path_b == doctest::Approx(0.4));
  CHECK(res.ratio == doctest::Approx(2.0));
  const auto text = lines_of(svg);
  REQUIRE_FALSE(text.empty());
  CHECK(text.front().find("<svg") == 0);
  CHECK(text.back() == "</svg>");
  std::filesystem::remove(svg);
}
