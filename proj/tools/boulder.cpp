// boulder: dataset generation, reset caches, training, evaluation, replay and trajectory plots.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "boulder/scripted.hpp"
#include "boulder/train.hpp"
#include "boulder/trajectory.hpp"

using namespace boulder;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path output_root() {
  const char* env = std::getenv("BOULDER_OUT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

// Top-level config file: environment keys plus an optional `train:` section.
struct RunFile {
  EnvConfig env;
  learn::PpoConfig ppo;
  int num_envs = 256;
  int checkpoint_every = 50;
  double stop_success = 0.0;
};

RunFile load_run_file(const fs::path& path) {
  RunFile rf;
  if (path.empty()) return rf;
  if (!fs::exists(path)) throw std::runtime_error("config file not found: " + path.string());
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }
  if (root.IsMap() && root["train"]) {
    const YAML::Node t = root["train"];
    root.remove("train");
    for (const auto& kv : t) {
      const auto key = kv.first.as<std::string>();
      const YAML::Node& v = kv.second;
      auto& p = rf.ppo;
      if (key == "learning_rate") p.learning_rate = v.as<double>();
      else if (key == "clip") p.clip = v.as<double>();
      else if (key == "value_coef") p.value_coef = v.as<double>();
      else if (key == "entropy_coef") p.entropy_coef = v.as<double>();
      else if (key == "epochs") p.epochs = v.as<int>();
      else if (key == "minibatches") p.minibatches = v.as<int>();
      else if (key == "rollout_steps") p.rollout_steps = v.as<int>();
      else if (key == "iterations") p.iterations = v.as<int>();
      else if (key == "gamma") p.gamma = v.as<double>();
      else if (key == "lambda") p.lambda = v.as<double>();
      else if (key == "max_grad_norm") p.max_grad_norm = v.as<double>();
      else if (key == "init_std") p.init_std = v.as<double>();
      else if (key == "hidden") p.hidden = v.as<std::vector<int>>();
      else if (key == "num_envs") rf.num_envs = v.as<int>();
      else if (key == "checkpoint_every") rf.checkpoint_every = v.as<int>();
      else if (key == "stop_success") rf.stop_success = v.as<double>();
      else throw DomainError("config: unknown key train." + key);
    }
  }
  std::stringstream ss;
  ss << root;
  rf.env = root.IsNull() ? EnvConfig{} : config_from_yaml(ss.str());
  return rf;
}

std::string run_file_yaml(const RunFile& rf) {
  std::string out = config_to_yaml(rf.env);
  const auto& p = rf.ppo;
  char buf[1024];
  std::string hidden;
  for (std::size_t i = 0; i < p.hidden.size(); ++i) hidden += (i ? ", " : "") + std::to_string(p.hidden[i]);
  std::snprintf(buf, sizeof(buf),
                "train:\n  learning_rate: %.17g\n  clip: %.17g\n  value_coef: %.17g\n  entropy_coef: %.17g\n"
                "  epochs: %d\n  minibatches: %d\n  rollout_steps: %d\n  iterations: %d\n  gamma: %.17g\n"
                "  lambda: %.17g\n  max_grad_norm: %.17g\n  init_std: %.17g\n  hidden: [%s]\n  num_envs: %d\n"
                "  checkpoint_every: %d\n  stop_success: %.17g\n",
                p.learning_rate, p.clip, p.value_coef, p.entropy_coef, p.epochs, p.minibatches, p.rollout_steps,
                p.iterations, p.gamma, p.lambda, p.max_grad_norm, p.init_std, hidden.c_str(), rf.num_envs,
                rf.checkpoint_every, rf.stop_success);
  if (out.empty() || out.back() != '\n') out += "\n";
  return out + buf;
}

// Every command leaves the configuration it actually ran with, plus its command line, beside its
// outputs.
void write_snapshot(const fs::path& dir, const RunFile& rf, const json& extra, int argc, char** argv) {
  fs::create_directories(dir);
  std::ofstream(dir / "resolved_config.yaml") << run_file_yaml(rf);
  json j = extra;
  std::vector<std::string> args(argv, argv + argc);
  j["command"] = args;
  j["config_hash"] = config_hash(rf.env);
  std::ofstream(dir / "run.json") << j.dump(1) << "\n";
}

rockgen::Split parse_split(const std::string& s) {
  if (s == "train") return rockgen::Split::Train;
  if (s == "heldout" || s == "held-out") return rockgen::Split::HeldOut;
  throw UsageError("split must be train or heldout");
}

std::shared_ptr<env::Context> make_context(const EnvConfig& cfg, const fs::path& data, rockgen::Split split,
                                           const fs::path& caches, std::uint64_t cache_seed) {
  if (!fs::exists(data / "manifest.json"))
    throw std::runtime_error("no rock dataset at " + data.string() + "; run `boulder rocks`");
  auto ctx = std::make_shared<env::Context>(cfg, env::RockLibrary::load(data, split));
  ctx->attach_caches(caches, cache_seed, 0, false);
  return ctx;
}

std::string percent(double x) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.1f%%", 100.0 * x);
  return buf;
}

struct Common {
  std::string config;
  std::string data;
  std::string caches;
  std::uint64_t cache_seed = 1;
  std::string split = "train";
  std::string out;

  fs::path data_dir() const { return data.empty() ? output_root() / "rocks" : fs::path(data); }
  fs::path cache_dir() const { return caches.empty() ? data_dir() / "caches" : fs::path(caches); }
  fs::path out_dir(const std::string& command) const { return out.empty() ? output_root() / command : fs::path(out); }
};

void add_data_options(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Configuration file (YAML)");
  app->add_option("--data", c.data, "Rock dataset directory (default $BOULDER_OUT/rocks)");
  app->add_option("--caches", c.caches, "Reset cache directory (default <data>/caches)");
  app->add_option("--cache-seed", c.cache_seed, "Seed the caches were populated with");
  app->add_option("--split", c.split, "Rock split: train or heldout");
}

// ---------------------------------------------------------------------------------------------

int cmd_rocks(int n, int holdout, std::uint64_t seed, const Common& c, int argc, char** argv) {
  if (n < 2) throw UsageError("--n must be at least 2");
  if (holdout < 0) throw UsageError("--holdout must be non-negative");
  rockgen::DatasetOptions opt;
  opt.train = n;
  opt.held_out = holdout;
  const auto dataset = rockgen::sample_dataset(opt, seed);
  const fs::path dir = c.out.empty() ? c.data_dir() : fs::path(c.out);
  rockgen::write_dataset(dataset, dir);
  RunFile rf = load_run_file(c.config);
  write_snapshot(dir / "run", rf, {{"seed", seed}, {"n", n}, {"holdout", holdout}, {"dataset_hash", dataset.hash()}},
                 argc, argv);
  std::printf("wrote %zu training and %zu held-out rocks to %s (hash %016llx)\n", dataset.train.size(),
              dataset.held_out.size(), dir.string().c_str(), static_cast<unsigned long long>(dataset.hash()));
  return kOk;
}

int cmd_cache(const std::vector<int>& levels, int count, const Common& c, int argc, char** argv) {
  if (count < 1) throw UsageError("--count must be positive");
  for (int l : levels)
    if (l < 0 || l >= kNumLevels) throw UsageError("levels must be in 0..4");
  RunFile rf = load_run_file(c.config);
  const auto lib = env::RockLibrary::load(c.data_dir(), parse_split(c.split));
  const fs::path dir = c.cache_dir();
  fs::create_directories(dir);
  for (int level : levels) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cache = env::populate_reset_cache(rf.env, lib, level, count, c.cache_seed);
    const auto path = dir / env::ResetCache::file_name(level, lib.dataset_hash, c.cache_seed);
    cache.save(path);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("level %d: %zu entries from %ld attempts (%.1f s) -> %s\n", level, cache.entries.size(), cache.attempts,
                s, path.string().c_str());
  }
  write_snapshot(dir / "run", rf, {{"count", count}, {"cache_seed", c.cache_seed}, {"split", c.split}}, argc, argv);
  return kOk;
}

int cmd_train(RunFile rf, int level, int iters, int envs, std::uint64_t seed, const std::string& resume,
              const Common& c, int argc, char** argv) {
  if (iters >= 0) rf.ppo.iterations = iters;
  if (envs > 0) rf.num_envs = envs;
  if (level >= kNumLevels) throw UsageError("--level must be in 0..4");
  if (level >= 0) rf.env.curriculum.pinned_level = level;
  if (rf.ppo.iterations < 0) throw UsageError("--iters must be non-negative");
  rf.env.validate();
  rf.ppo.validate();
  auto ctx = make_context(rf.env, c.data_dir(), parse_split(c.split), c.cache_dir(), c.cache_seed);
  const int start = rf.env.curriculum.pinned_level >= 0 ? rf.env.curriculum.pinned_level : rf.env.curriculum.start_level;
  if (!ctx->caches[start]) throw std::runtime_error("no reset cache for level " + std::to_string(start) + "; run `boulder cache`");

  learn::TrainConfig tc;
  tc.ppo = rf.ppo;
  tc.num_envs = rf.num_envs;
  tc.seed = seed;
  tc.checkpoint_every = rf.checkpoint_every;
  tc.stop_success = rf.stop_success;
  tc.output_dir = c.out_dir("train");
  std::optional<learn::Checkpoint> from;
  if (!resume.empty()) from = learn::load_checkpoint(resume);
  write_snapshot(tc.output_dir, rf, {{"seed", seed}, {"resume", resume}, {"dataset_hash", ctx->rocks.dataset_hash}},
                 argc, argv);

  const auto t0 = std::chrono::steady_clock::now();
  learn::Checkpoint ck = learn::train(ctx, tc, from, [&](const learn::IterationMetrics& m) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("iter %4d  level %d  success %6s (%4d)  return %8.3f  kl %.4f  std %.3f  %6.0f s\n", m.iteration,
                m.level, percent(m.success_rate).c_str(), m.window, m.mean_return, m.update.loss.approx_kl,
                m.action_std, s);
    std::fflush(stdout);
  });
  if (!ck.net.parameters().allFinite()) throw NumericFault("training produced non-finite parameters");
  if (rf.ppo.iterations == 0) {
    fs::create_directories(tc.output_dir);
    learn::save_checkpoint(ck, tc.output_dir / "policy.bin");
  }
  std::printf("checkpoint: %s\n", (tc.output_dir / "policy.bin").string().c_str());
  return kOk;
}

struct Cell {
  RockSize size;
  SoilMode soil;
};

int cmd_eval(const RunFile& rf, const std::string& checkpoint, bool oracle, int episodes, int level,
             std::uint64_t seed, const std::string& sizes, const std::string& soils, bool logs, const Common& c,
             int argc, char** argv) {
  if (episodes < 1) throw UsageError("--episodes must be positive");
  if (oracle == !checkpoint.empty()) throw UsageError("give exactly one of --checkpoint or --oracle");
  if (level < 0 || level >= kNumLevels) throw UsageError("--level must be in 0..4");
  std::vector<RockSize> size_list;
  if (sizes == "all" || sizes == "small") size_list.push_back(RockSize::Small);
  if (sizes == "all" || sizes == "large" || sizes == "big") size_list.push_back(RockSize::Large);
  std::vector<SoilMode> soil_list;
  if (soils == "all" || soils == "soft") soil_list.push_back(SoilMode::Soft);
  if (soils == "all" || soils == "hard") soil_list.push_back(SoilMode::Hard);
  if (size_list.empty() || soil_list.empty()) throw UsageError("--size must be small|large|all, --soil soft|hard|all");

  std::shared_ptr<const learn::ActorCritic> net;
  if (!oracle) {
    if (!fs::exists(checkpoint)) throw std::runtime_error("checkpoint not found: " + checkpoint);
    net = std::make_shared<learn::ActorCritic>(learn::load_checkpoint(checkpoint).net);
  }
  std::function<learn::Controller()> make = [&]() -> learn::Controller {
    if (net) return learn::policy_controller(net);
    auto pol = std::make_shared<learn::ScriptedPolicy>();
    return [pol](const env::Environment& e) { return pol->act(e); };
  };

  const fs::path out = c.out_dir("eval");
  write_snapshot(out, rf,
                 {{"seed", seed}, {"episodes", episodes}, {"level", level}, {"controller", oracle ? "oracle" : checkpoint}},
                 argc, argv);
  const auto base = env::RockLibrary::load(c.data_dir(), parse_split(c.split));

  std::vector<std::array<std::string, 4>> table;
  int total_success = 0, total = 0;
  for (RockSize size : size_list) {
    for (SoilMode soil : soil_list) {
      EnvConfig cfg = rf.env;
      cfg.rock_size = size;
      cfg.soil_mode = soil;
      auto ctx = std::make_shared<env::Context>(cfg, base);
      ctx->attach_caches(c.cache_dir(), c.cache_seed, 0, false);
      if (!ctx->caches[level]) throw std::runtime_error("no reset cache for level " + std::to_string(level));
      const std::string cell = std::string(to_string(size)) + "-" + to_string(soil);
      // Seeds depend on the episode index only, so the two soils see matched scenes.
      const auto res = learn::evaluate(ctx, level, episodes, seed, make, logs, [&](int k, const env::Environment& e) {
        if (!logs) return;
        char name[32];
        std::snprintf(name, sizeof(name), "episode_%04d.csv", k);
        traj::write_trajectory(out / "logs" / cell / name, e);
      });
      table.push_back({to_string(size), to_string(soil), std::to_string(res.successes) + "/" + std::to_string(res.episodes),
                       percent(res.success_rate())});
      total_success += res.successes;
      total += res.episodes;
    }
  }
  table.push_back({"average", "", std::to_string(total_success) + "/" + std::to_string(total),
                   percent(static_cast<double>(total_success) / total)});

  std::ofstream csv(out / "eval.csv");
  csv << "rock,soil,successes,success_rate\n";
  std::printf("%-8s %-5s %10s %8s\n", "rock", "soil", "successes", "rate");
  for (const auto& r : table) {
    csv << r[0] << "," << r[1] << "," << r[2] << "," << r[3] << "\n";
    std::printf("%-8s %-5s %10s %8s\n", r[0].c_str(), r[1].c_str(), r[2].c_str(), r[3].c_str());
  }
  return kOk;
}

int cmd_replay(const std::vector<std::string>& logs, const Common& c) {
  int bad = 0;
  for (const auto& path : logs) {
    const auto log = traj::read_trajectory(path);
    RunFile rf;
    rf.env = log.config_yaml.empty() ? load_run_file(c.config).env : config_from_yaml(log.config_yaml);
    auto ctx = std::make_shared<env::Context>(rf.env, env::RockLibrary::load(c.data_dir(), parse_split(c.split)));
    const auto rep = traj::replay(ctx, log);
    std::printf("%s: %d steps, %s\n", path.c_str(), rep.steps,
                rep.identical() ? "identical" : (std::to_string(rep.mismatches) + " mismatches, " + rep.detail).c_str());
    if (!rep.identical()) ++bad;
  }
  if (bad) throw NumericFault(std::to_string(bad) + " log(s) diverged on replay");
  return kOk;
}

// Files or directories; directories are paired by file name and their path lengths summed.
std::vector<std::pair<fs::path, fs::path>> pair_logs(const fs::path& a, const fs::path& b) {
  if (fs::is_directory(a) != fs::is_directory(b)) throw UsageError("plot: give two files or two directories");
  if (!fs::is_directory(a)) return {{a, b}};
  std::vector<std::pair<fs::path, fs::path>> out;
  std::vector<fs::path> names;
  for (const auto& e : fs::directory_iterator(a))
    if (e.path().extension() == ".csv") names.push_back(e.path().filename());
  std::sort(names.begin(), names.end());
  for (const auto& n : names)
    if (fs::exists(b / n)) out.emplace_back(a / n, b / n);
  if (out.empty()) throw std::runtime_error("plot: no matching logs in " + a.string() + " and " + b.string());
  return out;
}

int cmd_plot(const std::string& a, const std::string& b, const std::string& label_a, const std::string& label_b,
             const std::string& svg, const Common& c) {
  const auto pairs = pair_logs(a, b);
  const fs::path out = svg.empty() ? c.out_dir("plot") / "trajectories.svg" : fs::path(svg);
  double sum_a = 0.0, sum_b = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto ta = traj::read_trajectory(pairs[i].first, false);
    const auto tb = traj::read_trajectory(pairs[i].second, false);
    if (i == 0) {
      const auto r = traj::plot_paths(ta, label_a, tb, label_b, out);
      sum_a += r.path_a;
      sum_b += r.path_b;
    } else {
      sum_a += traj::in_soil_path(ta);
      sum_b += traj::in_soil_path(tb);
    }
  }
  const double ratio = sum_b > 0.0 ? sum_a / sum_b : (sum_a > 0.0 ? INFINITY : 1.0);
  std::printf("pairs %zu  %s path %.3f m  %s path %.3f m  ratio %.3f\nplot: %s\n", pairs.size(), label_a.c_str(), sum_a,
              label_b.c_str(), sum_b, ratio, out.string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boulder excavation environment: rocks, caches, training, evaluation and trajectory tools"};
  app.require_subcommand(1);
  Common c;

  auto* rocks = app.add_subcommand("rocks", "Generate the rock dataset");
  int n = 50, holdout = 25;
  std::uint64_t seed = 7;
  rocks->add_option("--n", n, "Training rocks")->capture_default_str();
  rocks->add_option("--holdout", holdout, "Held-out rocks")->capture_default_str();
  rocks->add_option("--seed", seed, "Dataset seed")->capture_default_str();
  rocks->add_option("--config", c.config, "Configuration file recorded in the snapshot");
  rocks->add_option("--out", c.out, "Output directory (default $BOULDER_OUT/rocks)");

  auto* cache = app.add_subcommand("cache", "Populate reset caches");
  std::vector<int> levels{0, 1, 2, 3, 4};
  int count = 1000;
  add_data_options(cache, c);
  cache->add_option("--levels", levels, "Levels to populate")->delimiter(',');
  cache->add_option("--count", count, "Entries per level")->capture_default_str();

  auto* train = app.add_subcommand("train", "Train a PPO policy");
  int level = -1, iters = -1, envs = 0;
  std::uint64_t train_seed = 1;
  std::string resume;
  add_data_options(train, c);
  train->add_option("--level", level, "Pin the curriculum to this level");
  train->add_option("--iters", iters, "PPO iterations (overrides the config)");
  train->add_option("--envs", envs, "Parallel environments (overrides the config)");
  train->add_option("--seed", train_seed, "Training seed")->capture_default_str();
  train->add_option("--resume", resume, "Checkpoint to continue from");
  train->add_option("--out", c.out, "Output directory (default $BOULDER_OUT/train)");

  auto* eval = app.add_subcommand("eval", "Success rates over the rock-size x soil grid");
  std::string checkpoint, sizes = "all", soils = "all";
  bool oracle = false, logs = false;
  int episodes = 100, eval_level = 0;
  std::uint64_t eval_seed = 1;
  add_data_options(eval, c);
  eval->add_option("--checkpoint", checkpoint, "Policy checkpoint");
  eval->add_flag("--oracle", oracle, "Use the scripted privileged-state controller");
  eval->add_option("--episodes", episodes, "Episodes per cell")->capture_default_str();
  eval->add_option("--level", eval_level, "Curriculum level")->capture_default_str();
  eval->add_option("--seed", eval_seed, "Evaluation seed")->capture_default_str();
  eval->add_option("--size", sizes, "small, large or all")->capture_default_str();
  eval->add_option("--soil", soils, "soft, hard or all")->capture_default_str();
  eval->add_flag("--logs", logs, "Write a trajectory log per episode");
  eval->add_option("--out", c.out, "Output directory (default $BOULDER_OUT/eval)");

  auto* replay = app.add_subcommand("replay", "Re-execute trajectory logs and compare rewards bitwise");
  std::vector<std::string> replay_logs;
  add_data_options(replay, c);
  replay->add_option("logs", replay_logs, "Trajectory CSV files")->required();

  auto* plot = app.add_subcommand("plot", "Plot two bucket-edge paths and their in-soil length ratio");
  std::string log_a, log_b, label_a = "hard", label_b = "soft", svg;
  plot->add_option("first", log_a, "Log (or directory of logs) of the first run, e.g. hard soil")->required();
  plot->add_option("second", log_b, "Log (or directory of logs) of the second run, e.g. soft soil")->required();
  plot->add_option("--label-a", label_a)->capture_default_str();
  plot->add_option("--label-b", label_b)->capture_default_str();
  plot->add_option("--svg", svg, "Output SVG (default $BOULDER_OUT/plot/trajectories.svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*rocks) return cmd_rocks(n, holdout, seed, c, argc, argv);
    if (*cache) return cmd_cache(levels, count, c, argc, argv);
    if (*train) return cmd_train(load_run_file(c.config), level, iters, envs, train_seed, resume, c, argc, argv);
    if (*eval)
      return cmd_eval(load_run_file(c.config), checkpoint, oracle, episodes, eval_level, eval_seed, sizes, soils, logs,
                      c, argc, argv);
    if (*replay) return cmd_replay(replay_logs, c);
    if (*plot) return cmd_plot(log_a, log_b, label_a, label_b, svg, c);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const NumericFault& e) {
    std::fprintf(stderr, "numeric fault: %s\n", e.what());
    return kNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
