#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "boulder/common.hpp"

namespace boulder::learn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kLeakySlope = 0.01;

/// Fully connected network with leaky-ReLU hidden layers and a linear output. Batches are stored
/// column-wise (one sample per column).
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> sizes, Rng& rng, double output_gain = 1.0);

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  int parameter_count() const;

  Matrix forward(const Matrix& x) const;

  /// Forward pass keeping the activations needed by backward().
  struct Tape {
    std::vector<Matrix> inputs;       // input of every layer
    std::vector<Matrix> preacts;      // pre-activation of every hidden layer
  };
  Matrix forward(const Matrix& x, Tape& tape) const;
  /// Accumulates parameter gradients for dL/d(output) into `grad` (flat, parameter order).
  void backward(const Tape& tape, const Matrix& d_out, Eigen::Ref<Vector> grad) const;

  /// Flat parameter view: W0 (column-major), b0, W1, b1, ...
  void get(Eigen::Ref<Vector> flat) const;
  void set(const Eigen::Ref<const Vector>& flat);

 private:
  std::vector<int> sizes_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

/// Gaussian policy with a state-independent log standard deviation and a separate value network.
class ActorCritic {
 public:
  ActorCritic() = default;
  ActorCritic(int obs_size, int action_size, const std::vector<int>& hidden, double init_std, std::uint64_t seed);

  int obs_size() const { return actor_.input_size(); }
  int action_size() const { return actor_.output_size(); }
  const std::vector<int>& hidden() const { return hidden_; }
  int parameter_count() const;

  Matrix mean(const Matrix& obs) const { return actor_.forward(obs); }
  Vector value(const Matrix& obs) const { return critic_.forward(obs).row(0).transpose(); }
  const Vector& log_std() const { return log_std_; }
  Vector std() const { return log_std_.array().exp(); }

  /// Flat layout: actor, critic, log_std.
  Vector parameters() const;
  void set_parameters(const Vector& flat);

  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }

 private:
  std::vector<int> hidden_;
  Mlp actor_, critic_;
  Vector log_std_;
};

/// Diagonal Gaussian log density of each column of `actions`.
Vector gaussian_log_prob(const Matrix& actions, const Matrix& mean, const Vector& log_std);
/// Differential entropy of the diagonal Gaussian.
double gaussian_entropy(const Vector& log_std);

struct GaeResult {
  Matrix advantages;  // T x N
  Matrix returns;     // T x N
};

/// Backward GAE recursion over a T x N rollout. `dones(t, n)` cuts the recursion after step t;
/// `last_values` bootstraps the step after the rollout. Throws DomainError on shape mismatch.
GaeResult gae(const Matrix& rewards, const Matrix& values, const Matrix& dones, const Vector& last_values,
              double gamma, double lambda);

/// In place, mean 0 and unit standard deviation (no-op scaling when the spread is ~0).
void normalize_advantages(Matrix& advantages);

struct PpoConfig {
  double learning_rate = 1e-4;
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.005;
  int epochs = 5;
  int minibatches = 4;
  int rollout_steps = 24;
  int iterations = 500;
  double gamma = 0.99;
  double lambda = 0.95;
  double max_grad_norm = 1.0;
  double init_std = 0.4;
  std::vector<int> hidden = {256, 256};
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;

  void validate() const;
};

/// Samples of one minibatch, column-wise.
struct PpoBatch {
  Matrix obs;
  Matrix actions;
  Vector old_log_prob;
  Vector advantages;
  Vector returns;
};

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

/// Clipped surrogate + value_coef * MSE - entropy_coef * entropy. Fills `grad` (size
/// parameter_count) when non-null.
LossTerms ppo_loss(const ActorCritic& net, const PpoBatch& batch, const PpoConfig& cfg, Vector* grad);

class Adam {
 public:
  Adam() = default;
  Adam(int size, double lr, double beta1, double beta2, double eps);
  void step(Vector& params, const Vector& grad);
  long steps() const { return t_; }
  const Vector& first() const { return m_; }
  const Vector& second() const { return v_; }
  void restore(long t, Vector m, Vector v);

 private:
  double lr_ = 1e-4, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  Vector m_, v_;
};

struct UpdateStats {
  LossTerms loss;
  double grad_norm = 0.0;
  int skipped = 0;
};

/// Epochs of shuffled minibatch updates over a rollout; non-finite losses or gradients skip the
/// minibatch and leave the parameters untouched.
UpdateStats ppo_update(ActorCritic& net, Adam& opt, const PpoBatch& rollout, const PpoConfig& cfg, Rng& rng);

struct Checkpoint {
  ActorCritic net;
  Adam optimizer;
  int iteration = 0;
  int level = 0;
  std::uint64_t layout_hash = 0;
  std::uint64_t config_hash = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws std::runtime_error on unreadable or malformed files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace boulder::learn
