#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "boulder/environment.hpp"
#include "boulder/learn.hpp"

namespace boulder::learn {

struct BatchStep {
  Vector rewards;
  Vector dones;
  /// 1 where the episode ended by timeout only (bootstrap the value of `terminal_obs`).
  Vector timeouts;
  Matrix terminal_obs;
  std::vector<env::Termination> causes;
  /// Undiscounted return of episodes that finished this step (NaN elsewhere).
  Vector episode_returns;
};

/// N environments stepped in parallel with automatic reset at the curriculum's current level.
/// Results are independent of the thread count.
class BatchEnvironment {
 public:
  BatchEnvironment(std::shared_ptr<const env::Context> ctx, int count, std::uint64_t seed,
                   const CurriculumConfig& curriculum);

  int size() const { return static_cast<int>(envs_.size()); }
  int obs_size() const { return ctx_->layout.size(); }
  const Matrix& observations() const { return obs_; }
  BatchStep step(const Matrix& actions);
  const env::Curriculum& curriculum() const { return curriculum_; }
  env::Environment& env(int i) { return *envs_[i]; }
  long episodes() const { return episodes_; }

 private:
  std::shared_ptr<const env::Context> ctx_;
  std::vector<std::unique_ptr<env::Environment>> envs_;
  env::Curriculum curriculum_;
  Matrix obs_;
  Vector returns_;
  long episodes_ = 0;
};

struct TrainConfig {
  PpoConfig ppo;
  int num_envs = 256;
  std::uint64_t seed = 1;
  /// Iterations between checkpoints (0: only the final one).
  int checkpoint_every = 50;
  std::filesystem::path output_dir = "runs/default";
  /// Stop early once the rolling success rate exceeds this with a full window (<= 0 disables).
  double stop_success = 0.0;
};

struct IterationMetrics {
  int iteration = 0;
  int level = 0;
  long episodes = 0;
  double success_rate = 0.0;
  int window = 0;
  double mean_return = 0.0;
  int finished = 0;
  double mean_reward = 0.0;
  UpdateStats update;
  double action_std = 0.0;
  std::array<int, 9> causes{};
};

/// Header and one CSV row; wall-clock time is deliberately excluded so reruns compare equal.
std::string metrics_header();
std::string metrics_row(const IterationMetrics& m);

using IterationCallback = std::function<void(const IterationMetrics&)>;

/// PPO training loop. `resume` continues from a checkpoint; with zero iterations the returned
/// checkpoint holds the initial network unchanged.
Checkpoint train(std::shared_ptr<const env::Context> ctx, const TrainConfig& cfg,
                 const std::optional<Checkpoint>& resume = std::nullopt, const IterationCallback& callback = {});

using Controller = std::function<arm::JointVector(const env::Environment&)>;

/// Deterministic (mean-action) controller of a trained network.
Controller policy_controller(std::shared_ptr<const ActorCritic> net);

struct EvalResult {
  int episodes = 0;
  int successes = 0;
  std::array<int, 9> causes{};
  double success_rate() const { return episodes ? static_cast<double>(successes) / episodes : 0.0; }
};

/// Runs `episodes` episodes at `level`; `make_controller` is called once per episode.
EvalResult evaluate(std::shared_ptr<const env::Context> ctx, int level, int episodes, std::uint64_t seed,
                    const std::function<Controller()>& make_controller, bool record = false,
                    const std::function<void(int, const env::Environment&)>& on_episode = {});

}  // namespace boulder::learn
