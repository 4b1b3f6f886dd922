#include "boulder/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace boulder::learn {

BatchEnvironment::BatchEnvironment(std::shared_ptr<const env::Context> ctx, int count, std::uint64_t seed,
                                   const CurriculumConfig& curriculum)
    : ctx_(std::move(ctx)), curriculum_(curriculum) {
  if (count < 1) throw DomainError("BatchEnvironment: need at least one environment");
  for (int i = 0; i < count; ++i) envs_.push_back(std::make_unique<env::Environment>(ctx_, mix_seed(seed, i)));
  obs_.resize(ctx_->layout.size(), count);
  returns_ = Vector::Zero(count);
  const int level = curriculum_.level();
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) obs_.col(i) = envs_[i]->reset(level);
}

BatchStep BatchEnvironment::step(const Matrix& actions) {
  const int n = size();
  if (actions.rows() != arm::kNumJoints || actions.cols() != n) throw DomainError("BatchEnvironment: action shape");
  BatchStep out;
  out.rewards.resize(n);
  out.dones = Vector::Zero(n);
  out.timeouts = Vector::Zero(n);
  out.terminal_obs = Matrix::Zero(obs_.rows(), n);
  out.causes.assign(n, env::Termination::None);
  out.episode_returns = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const arm::JointVector a = actions.col(i);
    const env::StepResult r = envs_[i]->step(a);
    out.rewards[i] = r.reward;
    out.causes[i] = r.cause;
    if (r.done) {
      out.dones[i] = 1.0;
      out.timeouts[i] = r.timeout ? 1.0 : 0.0;
      out.terminal_obs.col(i) = envs_[i]->observation();
    } else {
      obs_.col(i) = envs_[i]->observation();
    }
  }

  // Curriculum bookkeeping in index order keeps the run independent of scheduling.
  for (int i = 0; i < n; ++i) {
    returns_[i] += out.rewards[i];
    if (out.dones[i] == 0.0) continue;
    out.episode_returns[i] = returns_[i];
    returns_[i] = 0.0;
    ++episodes_;
    curriculum_.record(out.causes[i] == env::Termination::Success);
  }
  const int level = curriculum_.level();
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    if (out.dones[i] != 0.0) obs_.col(i) = envs_[i]->reset(level);
  }
  return out;
}

std::string metrics_header() {
  return "iteration,level,episodes,success_rate,window,mean_return,finished,mean_reward,loss,policy_loss,"
         "value_loss,entropy,approx_kl,clip_fraction,grad_norm,skipped,action_std,T1,T2,T3,T4,T5,T6,T7,fault";
}

std::string metrics_row(const IterationMetrics& m) {
  char buf[768];
  std::snprintf(buf, sizeof(buf), "%d,%d,%ld,%.17g,%d,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g",
                m.iteration, m.level, m.episodes, m.success_rate, m.window, m.mean_return, m.finished, m.mean_reward,
                m.update.loss.total, m.update.loss.policy, m.update.loss.value, m.update.loss.entropy,
                m.update.loss.approx_kl, m.update.loss.clip_fraction, m.update.grad_norm, m.update.skipped,
                m.action_std);
  std::string row = buf;
  for (int c = 1; c <= 8; ++c) row += "," + std::to_string(m.causes[c]);
  return row;
}

Checkpoint train(std::shared_ptr<const env::Context> ctx, const TrainConfig& cfg,
                 const std::optional<Checkpoint>& resume, const IterationCallback& callback) {
  const PpoConfig& ppo = cfg.ppo;
  ppo.validate();
  if (cfg.num_envs < 1) throw DomainError("train: num_envs must be positive");
  const int obs_size = ctx->layout.size();

  Checkpoint ck;
  CurriculumConfig cc = ctx->cfg.curriculum;
  if (resume) {
    if (resume->layout_hash != ctx->layout.hash() || resume->net.obs_size() != obs_size)
      throw std::runtime_error("checkpoint was trained with a different observation layout");
    ck = *resume;
    if (cc.pinned_level < 0) cc.start_level = resume->level;
  } else {
    ck.net = ActorCritic(obs_size, arm::kNumJoints, ppo.hidden, ppo.init_std, mix_seed(cfg.seed, 0));
    ck.level = cc.pinned_level >= 0 ? cc.pinned_level : cc.start_level;
  }
  const int n_params = ck.net.parameter_count();
  Adam opt(n_params, ppo.learning_rate, ppo.adam_beta1, ppo.adam_beta2, ppo.adam_eps);
  if (resume && ck.optimizer.first().size() == n_params)
    opt.restore(ck.optimizer.steps(), ck.optimizer.first(), ck.optimizer.second());
  ck.optimizer = opt;
  ck.layout_hash = ctx->layout.hash();
  ck.config_hash = config_hash(ctx->cfg);
  if (ppo.iterations == 0) return ck;

  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream metrics(cfg.output_dir / "metrics.csv");
  metrics << metrics_header() << "\n";

  const std::uint64_t run_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(ck.iteration) + 1);
  BatchEnvironment batch(ctx, cfg.num_envs, mix_seed(run_seed, 1), cc);
  Rng rng(mix_seed(run_seed, 2));
  std::normal_distribution<double> normal(0.0, 1.0);

  const int T = ppo.rollout_steps, N = cfg.num_envs, A = arm::kNumJoints;
  Matrix obs_buf(obs_size, T * N), act_buf(A, T * N);
  Vector logp_buf(T * N);
  Matrix rewards(T, N), values(T, N), dones(T, N);

  const int first = ck.iteration;
  for (int it = first; it < first + ppo.iterations; ++it) {
    IterationMetrics m;
    double return_sum = 0.0;
    for (int t = 0; t < T; ++t) {
      const Matrix obs = batch.observations();
      const Matrix mu = ck.net.mean(obs);
      const Vector v = ck.net.value(obs);
      const Vector sd = ck.net.std();
      Matrix act(A, N);
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < A; ++j) act(j, i) = mu(j, i) + sd[j] * normal(rng);
      const Vector logp = gaussian_log_prob(act, mu, ck.net.log_std());
      BatchStep s = batch.step(act);

      // Time-limit endings are not true terminals: fold in the value of the final state.
      std::vector<int> cut;
      for (int i = 0; i < N; ++i)
        if (s.timeouts[i] != 0.0) cut.push_back(i);
      if (!cut.empty()) {
        Matrix term(obs_size, static_cast<Eigen::Index>(cut.size()));
        for (std::size_t k = 0; k < cut.size(); ++k) term.col(k) = s.terminal_obs.col(cut[k]);
        const Vector tv = ck.net.value(term);
        for (std::size_t k = 0; k < cut.size(); ++k) s.rewards[cut[k]] += ppo.gamma * tv[k];
      }

      obs_buf.middleCols(t * N, N) = obs;
      act_buf.middleCols(t * N, N) = act;
      logp_buf.segment(t * N, N) = logp;
      rewards.row(t) = s.rewards.transpose();
      values.row(t) = v.transpose();
      dones.row(t) = s.dones.transpose();
      for (int i = 0; i < N; ++i) {
        if (s.dones[i] == 0.0) continue;
        ++m.finished;
        return_sum += s.episode_returns[i];
        ++m.causes[static_cast<int>(s.causes[i])];
      }
    }
    const Vector last_v = ck.net.value(batch.observations());
    GaeResult g = gae(rewards, values, dones, last_v, ppo.gamma, ppo.lambda);
    normalize_advantages(g.advantages);

    PpoBatch data;
    data.obs = std::move(obs_buf);
    data.actions = act_buf;
    data.old_log_prob = logp_buf;
    data.advantages.resize(T * N);
    data.returns.resize(T * N);
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < N; ++i) {
        data.advantages[t * N + i] = g.advantages(t, i);
        data.returns[t * N + i] = g.returns(t, i);
      }
    m.update = ppo_update(ck.net, opt, data, ppo, rng);
    obs_buf = std::move(data.obs);
    obs_buf.resize(obs_size, T * N);

    ck.iteration = it + 1;
    ck.level = batch.curriculum().level();
    ck.optimizer = opt;
    m.iteration = it + 1;
    m.level = ck.level;
    m.episodes = batch.episodes();
    m.success_rate = batch.curriculum().success_rate();
    m.window = batch.curriculum().window_count();
    m.mean_return = m.finished ? return_sum / m.finished : 0.0;
    m.mean_reward = rewards.mean();
    m.action_std = ck.net.std().mean();
    metrics << metrics_row(m) << "\n" << std::flush;
    if (callback) callback(m);
    if (cfg.checkpoint_every > 0 && ck.iteration % cfg.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_%05d.bin", ck.iteration);
      save_checkpoint(ck, cfg.output_dir / name);
    }
    if (cfg.stop_success > 0.0 && m.window == batch.curriculum().window_capacity() &&
        m.success_rate > cfg.stop_success)
      break;
  }
  save_checkpoint(ck, cfg.output_dir / "policy.bin");
  return ck;
}

Controller policy_controller(std::shared_ptr<const ActorCritic> net) {
  return [net](const env::Environment& e) {
    const Matrix mu = net->mean(e.observation());
    return arm::JointVector(mu.col(0));
  };
}

EvalResult evaluate(std::shared_ptr<const env::Context> ctx, int level, int episodes, std::uint64_t seed,
                    const std::function<Controller()>& make_controller, bool record,
                    const std::function<void(int, const env::Environment&)>& on_episode) {
  if (episodes < 1) throw DomainError("evaluate: episodes must be positive");
  std::vector<env::Termination> causes(episodes, env::Termination::None);
  std::vector<Controller> controllers;
  for (int k = 0; k < episodes; ++k) controllers.push_back(make_controller());
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < episodes; ++k) {
    env::Environment e(ctx, mix_seed(seed, k));
    e.set_recording(record);
    e.reset(level);
    env::StepResult r;
    while (!e.done()) r = e.step(controllers[k](e));
    causes[k] = r.cause;
    if (on_episode) {
#pragma omp critical
      on_episode(k, e);
    }
  }
  EvalResult out;
  out.episodes = episodes;
  for (auto c : causes) {
    ++out.causes[static_cast<int>(c)];
    if (c == env::Termination::Success) ++out.successes;
  }
  return out;
}

}  // namespace boulder::learn
