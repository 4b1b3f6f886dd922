#include "boulder/learn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace boulder::learn {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Matrix leaky(const Matrix& z) { return z.cwiseMax(kLeakySlope * z); }

}  // namespace

// ---------------------------------------------------------------------------------------------
// Mlp

Mlp::Mlp(std::vector<int> sizes, Rng& rng, double output_gain) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw DomainError("Mlp: need input and output sizes");
  for (int s : sizes_)
    if (s < 1) throw DomainError("Mlp: layer sizes must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    const bool last = l + 2 == sizes_.size();
    // He initialization for leaky-ReLU layers; the output layer is scaled by output_gain.
    const double scale = (last ? output_gain : 1.0) * std::sqrt(2.0 / in);
    Matrix w(out, in);
    for (int j = 0; j < in; ++j)
      for (int i = 0; i < out; ++i) w(i, j) = scale * normal(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(Vector::Zero(out));
  }
}

int Mlp::parameter_count() const {
  int n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += static_cast<int>(weights_[l].size() + biases_[l].size());
  return n;
}

Matrix Mlp::forward(const Matrix& x) const {
  Matrix h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = weights_[l] * h;
    z.colwise() += biases_[l];
    h = l + 1 < weights_.size() ? leaky(z) : std::move(z);
  }
  return h;
}

Matrix Mlp::forward(const Matrix& x, Tape& tape) const {
  tape.inputs.assign(1, x);
  tape.preacts.clear();
  Matrix h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = weights_[l] * h;
    z.colwise() += biases_[l];
    if (l + 1 < weights_.size()) {
      h = leaky(z);
      tape.preacts.push_back(std::move(z));
      tape.inputs.push_back(h);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

void Mlp::backward(const Tape& tape, const Matrix& d_out, Eigen::Ref<Vector> grad) const {
  std::vector<int> offsets(weights_.size());
  int off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    offsets[l] = off;
    off += static_cast<int>(weights_[l].size() + biases_[l].size());
  }
  Matrix delta = d_out;
  for (int l = static_cast<int>(weights_.size()) - 1; l >= 0; --l) {
    const Matrix& in = tape.inputs[l];
    const int nw = static_cast<int>(weights_[l].size());
    Eigen::Map<Matrix> gw(grad.data() + offsets[l], weights_[l].rows(), weights_[l].cols());
    gw.noalias() += delta * in.transpose();
    grad.segment(offsets[l] + nw, biases_[l].size()) += delta.rowwise().sum();
    if (l > 0) {
      Matrix back = weights_[l].transpose() * delta;
      const Matrix& z = tape.preacts[l - 1];
      delta = back.array() * (z.array() > 0.0).select(1.0, Matrix::Constant(z.rows(), z.cols(), kLeakySlope)).array();
    }
  }
}

void Mlp::get(Eigen::Ref<Vector> flat) const {
  int off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const int nw = static_cast<int>(weights_[l].size()), nb = static_cast<int>(biases_[l].size());
    flat.segment(off, nw) = Eigen::Map<const Vector>(weights_[l].data(), nw);
    flat.segment(off + nw, nb) = biases_[l];
    off += nw + nb;
  }
}

void Mlp::set(const Eigen::Ref<const Vector>& flat) {
  if (flat.size() != parameter_count()) throw DomainError("Mlp::set: size mismatch");
  int off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const int nw = static_cast<int>(weights_[l].size()), nb = static_cast<int>(biases_[l].size());
    Eigen::Map<Vector>(weights_[l].data(), nw) = flat.segment(off, nw);
    biases_[l] = flat.segment(off + nw, nb);
    off += nw + nb;
  }
}

// ---------------------------------------------------------------------------------------------
// ActorCritic

ActorCritic::ActorCritic(int obs_size, int action_size, const std::vector<int>& hidden, double init_std,
                         std::uint64_t seed)
    : hidden_(hidden) {
  if (!(init_std > 0.0)) throw DomainError("ActorCritic: init_std must be positive");
  Rng rng(seed);
  std::vector<int> a{obs_size}, c{obs_size};
  a.insert(a.end(), hidden.begin(), hidden.end());
  c.insert(c.end(), hidden.begin(), hidden.end());
  a.push_back(action_size);
  c.push_back(1);
  actor_ = Mlp(a, rng, 0.01);
  critic_ = Mlp(c, rng, 1.0);
  log_std_ = Vector::Constant(action_size, std::log(init_std));
}

int ActorCritic::parameter_count() const {
  return actor_.parameter_count() + critic_.parameter_count() + static_cast<int>(log_std_.size());
}

Vector ActorCritic::parameters() const {
  Vector p(parameter_count());
  const int na = actor_.parameter_count(), nc = critic_.parameter_count();
  actor_.get(p.segment(0, na));
  critic_.get(p.segment(na, nc));
  p.tail(log_std_.size()) = log_std_;
  return p;
}

void ActorCritic::set_parameters(const Vector& flat) {
  if (flat.size() != parameter_count()) throw DomainError("ActorCritic: parameter size mismatch");
  const int na = actor_.parameter_count(), nc = critic_.parameter_count();
  actor_.set(flat.segment(0, na));
  critic_.set(flat.segment(na, nc));
  log_std_ = flat.tail(log_std_.size());
}

Vector gaussian_log_prob(const Matrix& actions, const Matrix& mean, const Vector& log_std) {
  const Vector inv_var = (-2.0 * log_std).array().exp();
  const Matrix diff = actions - mean;
  Vector out = -0.5 * (diff.array().square().colwise() * inv_var.array()).colwise().sum().transpose();
  out.array() -= log_std.sum() + 0.5 * kLog2Pi * static_cast<double>(log_std.size());
  return out;
}

double gaussian_entropy(const Vector& log_std) {
  return log_std.sum() + 0.5 * (1.0 + kLog2Pi) * static_cast<double>(log_std.size());
}

// ---------------------------------------------------------------------------------------------
// GAE

GaeResult gae(const Matrix& rewards, const Matrix& values, const Matrix& dones, const Vector& last_values,
              double gamma, double lambda) {
  const Eigen::Index T = rewards.rows(), N = rewards.cols();
  if (values.rows() != T || values.cols() != N || dones.rows() != T || dones.cols() != N || last_values.size() != N)
    throw DomainError("gae: shape mismatch");
  GaeResult r;
  r.advantages.resize(T, N);
  for (Eigen::Index n = 0; n < N; ++n) {
    double next_adv = 0.0;
    double next_value = last_values[n];
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      const double live = 1.0 - dones(t, n);
      const double delta = rewards(t, n) + gamma * next_value * live - values(t, n);
      next_adv = delta + gamma * lambda * live * next_adv;
      r.advantages(t, n) = next_adv;
      next_value = values(t, n);
    }
  }
  r.returns = r.advantages + values;
  return r;
}

void normalize_advantages(Matrix& advantages) {
  const double n = static_cast<double>(advantages.size());
  if (n < 2) return;
  const double mean = advantages.mean();
  const double var = (advantages.array() - mean).square().sum() / (n - 1.0);
  advantages.array() = (advantages.array() - mean) / (std::sqrt(var) + 1e-8);
}

void PpoConfig::validate() const {
  if (!(learning_rate > 0) || !(clip > 0 && clip < 1) || !(value_coef >= 0) || !(entropy_coef >= 0) ||
      epochs < 1 || minibatches < 1 || rollout_steps < 1 || iterations < 0 || !(gamma > 0 && gamma <= 1) ||
      !(lambda >= 0 && lambda <= 1) || !(max_grad_norm > 0) || !(init_std > 0) || hidden.empty())
    throw DomainError("PpoConfig: parameter out of range");
}

// ---------------------------------------------------------------------------------------------
// PPO loss

LossTerms ppo_loss(const ActorCritic& net, const PpoBatch& b, const PpoConfig& cfg, Vector* grad) {
  const double M = static_cast<double>(b.obs.cols());
  Mlp::Tape ta, tc;
  const Matrix mu = net.actor().forward(b.obs, ta);
  const Vector v = net.critic().forward(b.obs, tc).row(0).transpose();
  const Vector& log_std = net.log_std();
  const Vector logp = gaussian_log_prob(b.actions, mu, log_std);
  const Vector ratio = (logp - b.old_log_prob).array().exp();

  LossTerms out;
  Vector d_logp(b.obs.cols());
  double surrogate = 0.0, kl = 0.0, clipped = 0.0;
  for (Eigen::Index i = 0; i < ratio.size(); ++i) {
    const double r = ratio[i], a = b.advantages[i];
    const double rc = std::clamp(r, 1.0 - cfg.clip, 1.0 + cfg.clip);
    const double unclipped = r * a, clipped_term = rc * a;
    if (unclipped <= clipped_term) {
      surrogate += unclipped;
      d_logp[i] = -a * r / M;
    } else {
      surrogate += clipped_term;
      d_logp[i] = 0.0;
    }
    kl += (r - 1.0) - std::log(r);
    if (std::abs(r - 1.0) > cfg.clip) clipped += 1.0;
  }
  out.policy = -surrogate / M;
  out.value = (v - b.returns).squaredNorm() / M;
  out.entropy = gaussian_entropy(log_std);
  out.approx_kl = kl / M;
  out.clip_fraction = clipped / M;
  out.total = out.policy + cfg.value_coef * out.value - cfg.entropy_coef * out.entropy;

  if (grad) {
    const int na = net.actor().parameter_count(), nc = net.critic().parameter_count();
    grad->setZero(net.parameter_count());
    const Vector inv_var = (-2.0 * log_std).array().exp();
    const Matrix diff = b.actions - mu;
    // d logp / d mu = diff / var
    const Matrix d_mu = (diff.array().colwise() * inv_var.array()).rowwise() * d_logp.transpose().array();
    net.actor().backward(ta, d_mu, grad->segment(0, na));
    const Matrix d_v = (2.0 * cfg.value_coef / M) * (v - b.returns).transpose();
    net.critic().backward(tc, d_v, grad->segment(na, nc));
    // d logp / d log_std = diff^2 / var - 1; entropy contributes -entropy_coef per dimension.
    const Matrix dls = (diff.array().square().colwise() * inv_var.array()) - 1.0;
    grad->tail(log_std.size()) = dls * d_logp - Vector::Constant(log_std.size(), cfg.entropy_coef);
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Adam

Adam::Adam(int size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

void Adam::step(Vector& params, const Vector& grad) {
  if (grad.size() != m_.size() || params.size() != m_.size()) throw DomainError("Adam: size mismatch");
  ++t_;
  m_ = b1_ * m_ + (1.0 - b1_) * grad;
  v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void Adam::restore(long t, Vector m, Vector v) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw DomainError("Adam: restore size mismatch");
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

UpdateStats ppo_update(ActorCritic& net, Adam& opt, const PpoBatch& rollout, const PpoConfig& cfg, Rng& rng) {
  const int n = static_cast<int>(rollout.obs.cols());
  const int mb = std::max(1, n / cfg.minibatches);
  std::vector<int> order(n);
  UpdateStats stats;
  int count = 0;
  Vector params = net.parameters();
  Vector grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int k = 0; k < cfg.minibatches; ++k) {
      const int begin = k * mb, end = k + 1 == cfg.minibatches ? n : begin + mb;
      if (end <= begin) continue;
      PpoBatch b;
      const int m = end - begin;
      b.obs.resize(rollout.obs.rows(), m);
      b.actions.resize(rollout.actions.rows(), m);
      b.old_log_prob.resize(m);
      b.advantages.resize(m);
      b.returns.resize(m);
      for (int j = 0; j < m; ++j) {
        const int s = order[begin + j];
        b.obs.col(j) = rollout.obs.col(s);
        b.actions.col(j) = rollout.actions.col(s);
        b.old_log_prob[j] = rollout.old_log_prob[s];
        b.advantages[j] = rollout.advantages[s];
        b.returns[j] = rollout.returns[s];
      }
      const LossTerms loss = ppo_loss(net, b, cfg, &grad);
      if (!std::isfinite(loss.total) || !grad.allFinite()) {
        ++stats.skipped;
        continue;
      }
      const double norm = grad.norm();
      if (norm > cfg.max_grad_norm) grad *= cfg.max_grad_norm / norm;
      opt.step(params, grad);
      net.set_parameters(params);
      stats.grad_norm += norm;
      stats.loss.total += loss.total;
      stats.loss.policy += loss.policy;
      stats.loss.value += loss.value;
      stats.loss.entropy += loss.entropy;
      stats.loss.approx_kl += loss.approx_kl;
      stats.loss.clip_fraction += loss.clip_fraction;
      ++count;
    }
  }
  if (count > 0) {
    const double c = count;
    stats.grad_norm /= c;
    stats.loss.total /= c;
    stats.loss.policy /= c;
    stats.loss.value /= c;
    stats.loss.entropy /= c;
    stats.loss.approx_kl /= c;
    stats.loss.clip_fraction /= c;
  }
  return stats;
}

// ---------------------------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'B', 'L', 'D', 'R', 'C', 'K', 'P', '1'};

template <typename T>
void put(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void put_vector(std::ofstream& f, const Vector& v) {
  put<std::int64_t>(f, v.size());
  f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Vector take_vector(std::ifstream& f, std::int64_t expected) {
  const auto n = take<std::int64_t>(f);
  if (n != expected) throw std::runtime_error("checkpoint: vector size mismatch");
  Vector v(n);
  f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!f) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path.string());
  f.write(kMagic, sizeof(kMagic));
  put<std::int32_t>(f, c.net.obs_size());
  put<std::int32_t>(f, c.net.action_size());
  put<std::int32_t>(f, static_cast<std::int32_t>(c.net.hidden().size()));
  for (int h : c.net.hidden()) put<std::int32_t>(f, h);
  put<std::uint64_t>(f, c.layout_hash);
  put<std::uint64_t>(f, c.config_hash);
  put<std::int32_t>(f, c.iteration);
  put<std::int32_t>(f, c.level);
  put_vector(f, c.net.parameters());
  put<std::int64_t>(f, c.optimizer.steps());
  put_vector(f, c.optimizer.first());
  put_vector(f, c.optimizer.second());
  if (!f) throw std::runtime_error("error writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error("not a checkpoint: " + path.string());
  const int obs = take<std::int32_t>(f), act = take<std::int32_t>(f), depth = take<std::int32_t>(f);
  if (obs < 1 || act < 1 || depth < 1 || depth > 16) throw std::runtime_error("checkpoint: bad header");
  std::vector<int> hidden(depth);
  for (int& h : hidden) {
    h = take<std::int32_t>(f);
    if (h < 1 || h > 1 << 16) throw std::runtime_error("checkpoint: bad layer size");
  }
  Checkpoint c;
  c.layout_hash = take<std::uint64_t>(f);
  c.config_hash = take<std::uint64_t>(f);
  c.iteration = take<std::int32_t>(f);
  c.level = take<std::int32_t>(f);
  c.net = ActorCritic(obs, act, hidden, 1.0, 0);
  const int n = c.net.parameter_count();
  c.net.set_parameters(take_vector(f, n));
  const auto t = take<std::int64_t>(f);
  c.optimizer = Adam(n, 1e-4, 0.9, 0.999, 1e-8);
  Vector m = take_vector(f, n);
  Vector v = take_vector(f, n);
  c.optimizer.restore(t, std::move(m), std::move(v));
  return c;
}

}  // namespace boulder::learn
