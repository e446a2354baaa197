#include "sbrl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "sbrl/errors.hpp"

namespace sbrl {

namespace {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated checkpoint");
  return v;
}

void write_vec(std::ostream& out, const Eigen::VectorXd& v) {
  write_pod<int64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Eigen::VectorXd read_vec(std::istream& in) {
  const int64_t n = read_pod<int64_t>(in);
  if (n < 0) throw IoError("corrupt checkpoint");
  Eigen::VectorXd v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("truncated checkpoint");
  return v;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

TrainMode parse_mode(const std::string& name) {
  if (name == "ours") return TrainMode::kOurs;
  if (name == "step") return TrainMode::kStep;
  if (name == "crl") return TrainMode::kCrl;
  throw ConfigError("unknown mode: " + name);
}

std::string mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kOurs: return "ours";
    case TrainMode::kStep: return "step";
    case TrainMode::kCrl: return "crl";
  }
  return "ours";
}

TrainerConfig TrainerConfig::from_config(const Config& cfg) {
  TrainerConfig t;
  t.mode = parse_mode(cfg.get_string("train.mode", "ours"));
  t.num_env = cfg.get_int("train.num_env", t.num_env);
  t.n_step = cfg.get_int("train.n_step", t.n_step);
  t.total_steps = cfg.get_long("train.total_steps", t.total_steps);
  t.gamma = cfg.get_double("train.gamma", t.gamma);
  t.gae_lambda = cfg.get_double("train.gae_lambda", t.gae_lambda);
  t.lr = cfg.get_double("train.lr", t.lr);
  t.clip_range = cfg.get_double("train.clip_range", t.clip_range);
  t.ent_coef = cfg.get_double("train.ent_coef", t.ent_coef);
  t.vf_coef = cfg.get_double("train.vf_coef", t.vf_coef);
  t.n_opt_epoch = cfg.get_int("train.n_opt_epoch", t.n_opt_epoch);
  t.batch_size = cfg.get_int("train.batch_size", t.batch_size);
  t.kl_threshold = cfg.get_double("train.kl_threshold", t.kl_threshold);
  t.lambda_psi = cfg.get_double("train.lambda_psi", t.lambda_psi);
  t.aux_psi_coef = cfg.get_double("train.aux_psi_coef", t.aux_psi_coef);
  t.alpha_s_init = cfg.get_double("train.alpha_s_init", t.alpha_s_init);
  t.alpha_s_lr = cfg.get_double("train.alpha_s_lr", t.alpha_s_lr);
  t.style_budget = cfg.get_double("train.style_budget", t.style_budget);
  t.checkpoint_every = cfg.get_int("train.checkpoint_every", t.checkpoint_every);
  t.seed = static_cast<uint64_t>(cfg.get_long("train.seed", 0));
  t.predictor_val_fraction =
      cfg.get_double("train.predictor_val_fraction", t.predictor_val_fraction);
  t.predictor_patience =
      cfg.get_int("train.predictor_patience", t.predictor_patience);
  t.predictor_max_steps =
      cfg.get_int("train.predictor_max_steps", t.predictor_max_steps);
  t.predictor_eval_every =
      cfg.get_int("train.predictor_eval_every", t.predictor_eval_every);
  t.pretrain_lr = cfg.get_double("train.pretrain_lr", t.pretrain_lr);
  t.pretrain_batch = cfg.get_int("train.pretrain_batch", t.pretrain_batch);
  t.pretrain_epochs = cfg.get_int("train.pretrain_epochs", t.pretrain_epochs);
  t.alpha_reg = cfg.get_double("train.alpha_reg", t.alpha_reg);
  t.alpha_psi_pt = cfg.get_double("train.alpha_psi_pt", t.alpha_psi_pt);
  if (t.num_env < 1 || t.n_step < 1) throw ConfigError("empty rollout shape");
  return t;
}

void gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
         const std::vector<char>& dones, double last_value, double gamma,
         double lambda, Eigen::VectorXd* advantages, Eigen::VectorXd* returns) {
  const long n = rewards.size();
  if (values.size() != n || static_cast<long>(dones.size()) != n)
    throw ShapeMismatch("advantage input length mismatch");
  advantages->resize(n);
  returns->resize(n);
  double running = 0.0;
  for (long t = n - 1; t >= 0; --t) {
    const double not_done = dones[t] ? 0.0 : 1.0;
    const double next_value =
        t + 1 < n ? values(t + 1) : last_value;
    const double delta =
        rewards(t) + gamma * next_value * not_done - values(t);
    running = delta + gamma * lambda * not_done * running;
    (*advantages)(t) = running;
  }
  *returns = *advantages + values;
}

double dual_ascent_alpha(double alpha, double budget, double mean_style,
                         double lr) {
  return std::max(0.0, alpha + lr * (budget - mean_style));
}

uint64_t derive_seed(uint64_t seed, uint64_t purpose, uint64_t a, uint64_t b) {
  uint64_t h = splitmix64(seed ^ 0x5bd1e995u);
  h = splitmix64(h ^ splitmix64(purpose));
  h = splitmix64(h ^ splitmix64(a));
  h = splitmix64(h ^ splitmix64(b));
  return h;
}

struct Trainer::Rollout {
  int num_env = 0;
  int n_step = 0;
  int horizon = 0;

  Eigen::MatrixXd obs;       // N x 77, env-major rows
  Eigen::MatrixXd actions;   // N x 2
  Eigen::VectorXd log_probs;
  Eigen::VectorXd values;
  std::vector<char> dones;
  std::vector<Pose> poses;               // pre-step pose
  std::vector<Vec2> positions_after;     // post-step position
  std::vector<int> ref_id;               // index into refs
  std::vector<ReferenceTrajectory> refs;
  std::vector<RewardBreakdown> breakdown;
  Eigen::VectorXd rewards;
  Eigen::VectorXd advantages, returns;
  std::vector<double> last_values;
  std::vector<std::vector<Eigen::Vector2d>> futures;
  std::vector<char> has_future;

  long size() const { return static_cast<long>(num_env) * n_step; }
  long idx(int e, int t) const { return static_cast<long>(e) * n_step + t; }
};

Trainer::Trainer(Track track, TrajectoryDistributionModel rtd,
                 PolicyBundle policy, TrainerConfig cfg,
                 RewardConfig reward_cfg, VehicleParams vehicle)
    : track_(std::move(track)),
      rtd_(std::move(rtd)),
      policy_(std::make_unique<PolicyBundle>(std::move(policy))),
      cfg_(cfg),
      reward_cfg_(reward_cfg),
      vehicle_(vehicle),
      alpha_s_(cfg.mode == TrainMode::kCrl ? 0.0 : cfg.alpha_s_init),
      opt_(policy_->num_params(), cfg.lr) {
  for (int e = 0; e < cfg_.num_env; ++e) {
    envs_.emplace_back(track_, vehicle_);
    ep_.emplace_back();
    ep_.back().episode_counter = -1;
    reset_env(e, true);
  }
}

void Trainer::reset_env(int e, bool increment_episode) {
  if (increment_episode) ++ep_[e].episode_counter;
  const uint64_t ref_seed = derive_seed(
      cfg_.seed, 5, static_cast<uint64_t>(e),
      static_cast<uint64_t>(ep_[e].episode_counter));
  const ReferenceTrajectory ref = sample_reference(rtd_, track_, ref_seed);
  envs_[e].reset(ref);
  EpisodeState& s = ep_[e];
  const long counter = s.episode_counter;
  s = EpisodeState{};
  s.episode_counter = counter;
  s.prev_s_center =
      track_.centerline.project(envs_[e].state().position).s;
}

void Trainer::collect_rollout(Rollout* ro) {
  const long n = ro->size();
  ro->obs.resize(n, kObservationSize);
  ro->actions.resize(n, kActionSize);
  ro->log_probs.resize(n);
  ro->values.resize(n);
  ro->dones.assign(n, 0);
  ro->poses.resize(n);
  ro->positions_after.resize(n);
  ro->ref_id.assign(n, -1);
  ro->refs.clear();
  ro->breakdown.assign(n, RewardBreakdown{});
  ro->last_values.assign(ro->num_env, 0.0);

  for (int e = 0; e < ro->num_env; ++e) {
    std::mt19937_64 act_rng(derive_seed(
        cfg_.seed, 1, static_cast<uint64_t>(update_idx_),
        static_cast<uint64_t>(e)));
    // The reference in force when the rollout starts.
    ro->refs.push_back(envs_[e].reference());
    int current_ref = static_cast<int>(ro->refs.size()) - 1;

    for (int t = 0; t < ro->n_step; ++t) {
      const long i = ro->idx(e, t);
      RaceEnv& env = envs_[e];
      EpisodeState& ep = ep_[e];

      const Eigen::VectorXd obs = env.observe();
      const auto act = policy_->act(obs, act_rng);
      ro->obs.row(i) = obs.transpose();
      ro->actions.row(i) = act.action.transpose();
      ro->log_probs(i) = act.log_prob;
      ro->values(i) = act.value;
      ro->poses[i] = env.state().pose();
      ro->ref_id[i] = current_ref;

      const Vec2 prev_pos = env.state().position;
      const StepOutcome out = env.step({act.action(0), act.action(1)});
      const Vec2 next_pos = out.next_state.position;
      ro->positions_after[i] = next_pos;

      RewardBreakdown& b = ro->breakdown[i];
      b.r_p = progress_reward(prev_pos, next_pos, track_.centerline);
      b.r_s = style_reward(next_pos, env.reference().curve,
                           reward_cfg_.alpha_d);
      b.penalty = reward_cfg_.penalty_for(out.terminated);

      // Episode bookkeeping.
      ep.steps += 1;
      ep.progress += b.r_p;
      ep.style_sum += b.r_s;
      const Projection ref_proj = env.reference().curve.project(next_pos);
      ep.offset_sum += (next_pos - ref_proj.foot).norm();
      ep.lap_progress += b.r_p;
      const double track_len = track_.centerline.total_length();
      if (track_.centerline.closed() && ep.lap_progress >= track_len &&
          b.r_p > 0.0) {
        const double overshoot = ep.lap_progress - track_len;
        const double frac = std::min(1.0, overshoot / b.r_p);
        const double finish_time =
            static_cast<double>(ep.steps) * vehicle_.dt - frac * vehicle_.dt;
        const double lap_time = finish_time - ep.lap_start_time;
        if (ep.best_lap < 0.0 || lap_time < ep.best_lap)
          ep.best_lap = lap_time;
        if (best_lap_time_ < 0.0 || lap_time < best_lap_time_)
          best_lap_time_ = lap_time;
        ep.lap_start_time = finish_time;
        ep.lap_progress = overshoot;
      }

      if (out.terminated != Termination::kNone) {
        ro->dones[i] = 1;
        EpisodeRecord rec;
        rec.update = update_idx_;
        rec.env = e;
        rec.episode = ep.episode_counter;
        rec.steps = ep.steps;
        rec.progress = ep.progress;
        rec.mean_style = ep.steps > 0 ? ep.style_sum / ep.steps : 0.0;
        rec.mro = ep.steps > 0 ? ep.offset_sum / ep.steps : 0.0;
        rec.termination = static_cast<int>(out.terminated);
        rec.lap_time = ep.best_lap;
        episode_records_.push_back(rec);
        reset_env(e, true);
        ro->refs.push_back(envs_[e].reference());
        current_ref = static_cast<int>(ro->refs.size()) - 1;
      }
    }
    if (!ro->dones[ro->idx(e, ro->n_step - 1)])
      ro->last_values[e] = policy_->value_of(envs_[e].observe());
  }
  env_steps_ += n;

  // Realized futures in the frame of the acting car: valid when the next
  // `horizon` positions stay inside the same episode and the rollout.
  const int h = ro->horizon;
  ro->futures.assign(n, {});
  ro->has_future.assign(n, 0);
  for (int e = 0; e < ro->num_env; ++e) {
    for (int t = 0; t + h <= ro->n_step; ++t) {
      bool ok = true;
      for (int u = t; u < t + h - 1; ++u)
        if (ro->dones[ro->idx(e, u)]) { ok = false; break; }
      if (!ok) continue;
      const long i = ro->idx(e, t);
      std::vector<Eigen::Vector2d> fut(h);
      for (int u = 0; u < h; ++u)
        fut[u] = to_local(ro->poses[i], ro->positions_after[ro->idx(e, t + u)]);
      ro->futures[i] = std::move(fut);
      ro->has_future[i] = 1;
    }
  }
}

void Trainer::compute_horizon_rewards(Rollout* ro) {
  if (cfg_.mode != TrainMode::kOurs) return;
  const int h = ro->horizon;
  const int degree = policy_->config().bezier_degree;
  PolicyBundle::ForwardPass fp;
  policy_->forward_all(ro->obs, &fp);
  for (int e = 0; e < ro->num_env; ++e) {
    std::mt19937_64 rng(derive_seed(cfg_.seed, 2,
                                    static_cast<uint64_t>(update_idx_),
                                    static_cast<uint64_t>(e)));
    for (int t = 0; t < ro->n_step; ++t) {
      const long i = ro->idx(e, t);
      const BezierParams params =
          BezierParams::unpack(fp.pred_raw.row(i).transpose(), degree);
      const BezierPrediction pred = evaluate(params, h);
      RewardBreakdown& b = ro->breakdown[i];
      b.r_p_psi = horizon_progress_reward(pred, ro->poses[i],
                                          track_.centerline, reward_cfg_, rng);
      b.r_s_psi = horizon_style_reward(pred, ro->poses[i],
                                       ro->refs[ro->ref_id[i]].curve,
                                       reward_cfg_, rng);
    }
  }
}

void Trainer::assemble_rewards(Rollout* ro) {
  const long n = ro->size();
  ro->rewards.resize(n);
  for (long i = 0; i < n; ++i) {
    const RewardBreakdown& b = ro->breakdown[i];
    double r = 0.0;
    switch (cfg_.mode) {
      case TrainMode::kOurs:
        r = combine(b, alpha_s_);
        break;
      case TrainMode::kStep:
        r = b.r_p + alpha_s_ * b.r_s + b.penalty;
        break;
      case TrainMode::kCrl:
        r = b.r_p + b.penalty;
        break;
    }
    ro->rewards(i) = r;
  }
}

void Trainer::compute_advantages(Rollout* ro) {
  const long n = ro->size();
  ro->advantages.resize(n);
  ro->returns.resize(n);
  for (int e = 0; e < ro->num_env; ++e) {
    const long off = ro->idx(e, 0);
    const Eigen::VectorXd r = ro->rewards.segment(off, ro->n_step);
    const Eigen::VectorXd v = ro->values.segment(off, ro->n_step);
    std::vector<char> d(ro->dones.begin() + off,
                        ro->dones.begin() + off + ro->n_step);
    Eigen::VectorXd adv, ret;
    gae(r, v, d, ro->last_values[e], cfg_.gamma, cfg_.gae_lambda, &adv, &ret);
    ro->advantages.segment(off, ro->n_step) = adv;
    ro->returns.segment(off, ro->n_step) = ret;
  }
  const double mean = ro->advantages.mean();
  const double var =
      (ro->advantages.array() - mean).square().sum() / ro->advantages.size();
  ro->advantages = (ro->advantages.array() - mean) / (std::sqrt(var) + 1e-8);
}

void Trainer::ppo_update(const Rollout& ro, UpdateStats* stats) {
  const long n = ro.size();
  const int degree = policy_->config().bezier_degree;
  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0);

  double kl_acc = 0.0, clip_acc = 0.0, vloss_acc = 0.0, ent_acc = 0.0;
  long batch_count = 0;
  bool aborted = false;

  Eigen::VectorXd params = policy_->get_params();
  for (int epoch = 0; epoch < cfg_.n_opt_epoch && !aborted; ++epoch) {
    std::mt19937_64 shuffle_rng(derive_seed(
        cfg_.seed, 3, static_cast<uint64_t>(update_idx_),
        static_cast<uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (long start = 0; start < n && !aborted; start += cfg_.batch_size) {
      const long bsz = std::min<long>(cfg_.batch_size, n - start);
      Eigen::MatrixXd obs(bsz, kObservationSize);
      for (long j = 0; j < bsz; ++j)
        obs.row(j) = ro.obs.row(order[start + j]);

      PolicyBundle::ForwardPass fp;
      policy_->forward_all(obs, &fp);
      const Eigen::VectorXd log_std = policy_->log_std();
      const Eigen::VectorXd stds = clamped_std(log_std);

      Eigen::MatrixXd d_mean = Eigen::MatrixXd::Zero(bsz, kActionSize);
      Eigen::MatrixXd d_values = Eigen::MatrixXd::Zero(bsz, 1);
      Eigen::MatrixXd d_pred;
      Eigen::VectorXd d_log_std = Eigen::VectorXd::Zero(kActionSize);

      long n_future = 0;
      for (long j = 0; j < bsz; ++j)
        if (ro.has_future[order[start + j]]) ++n_future;
      if (n_future > 0 && cfg_.aux_psi_coef > 0.0)
        d_pred = Eigen::MatrixXd::Zero(bsz, fp.pred_raw.cols());

      double kl_sum = 0.0;
      long clip_hits = 0;
      double vloss = 0.0;
      for (long j = 0; j < bsz; ++j) {
        const long i = order[start + j];
        const Eigen::VectorXd mean = fp.mean.row(j).transpose();
        const Eigen::VectorXd action = ro.actions.row(i).transpose();
        const double lp_new = gaussian_log_prob(mean, log_std, action);
        const double ratio = std::exp(lp_new - ro.log_probs(i));
        const double adv = ro.advantages(i);
        kl_sum += (ratio - 1.0) - (lp_new - ro.log_probs(i));
        if (std::abs(ratio - 1.0) > cfg_.clip_range) ++clip_hits;

        const double lo = 1.0 - cfg_.clip_range, hi = 1.0 + cfg_.clip_range;
        const double surr1 = ratio * adv;
        const double surr2 = std::clamp(ratio, lo, hi) * adv;
        // Gradient of -min(surr1, surr2) w.r.t. lp_new.
        double dloss_dlp = 0.0;
        if (surr1 <= surr2) dloss_dlp = -ratio * adv;

        const Eigen::VectorXd z =
            (action - mean).cwiseQuotient(stds);
        if (dloss_dlp != 0.0) {
          // dlp/dmean = z / std, dlp/dlog_std = z^2 - 1.
          d_mean.row(j) =
              (dloss_dlp / bsz) * z.cwiseQuotient(stds).transpose();
          d_log_std +=
              (dloss_dlp / bsz) *
              (z.array().square() - 1.0).matrix();
        }

        const double verr = fp.values(j, 0) - ro.returns(i);
        vloss += verr * verr;
        d_values(j, 0) = cfg_.vf_coef * 2.0 * verr / bsz;

        if (d_pred.size() > 0 && ro.has_future[i]) {
          Eigen::VectorXd g;
          predictor_loss_grad(fp.pred_raw.row(j).transpose(), degree,
                              ro.futures[i], cfg_.lambda_psi, &g);
          d_pred.row(j) = (-cfg_.aux_psi_coef / n_future) * g.transpose();
        }
      }
      const double approx_kl = kl_sum / bsz;
      if (approx_kl > cfg_.kl_threshold) {
        aborted = true;
        stats->kl_abort = true;
        kl_acc += approx_kl;
        ++batch_count;
        break;
      }

      // Entropy bonus, constant across states.
      const double entropy = gaussian_entropy(log_std);
      for (int k = 0; k < kActionSize; ++k) {
        const bool clamped =
            log_std(k) <= kLogStdMin || log_std(k) >= kLogStdMax;
        if (!clamped) d_log_std(k) += -cfg_.ent_coef;
      }

      Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy_->num_params());
      policy_->backward_all(fp, d_mean, d_values, d_pred, d_log_std, &grad);
      opt_.step(&params, grad);
      policy_->set_params(params);

      kl_acc += approx_kl;
      clip_acc += static_cast<double>(clip_hits) / bsz;
      vloss_acc += vloss / bsz;
      ent_acc += entropy;
      ++batch_count;
    }
  }
  if (batch_count > 0) {
    stats->approx_kl = kl_acc / batch_count;
    stats->clip_fraction = clip_acc / batch_count;
    stats->value_loss = vloss_acc / batch_count;
    stats->entropy = ent_acc / batch_count;
  }
}

double Trainer::refine_predictor(const Rollout& ro) {
  const int degree = policy_->config().bezier_degree;
  std::vector<long> rows;
  for (long i = 0; i < ro.size(); ++i)
    if (ro.has_future[i]) rows.push_back(i);
  if (rows.size() < 8) return 0.0;

  std::mt19937_64 rng(derive_seed(cfg_.seed, 4,
                                  static_cast<uint64_t>(update_idx_), 0));
  std::shuffle(rows.begin(), rows.end(), rng);
  const long n_val = std::max<long>(
      1, static_cast<long>(cfg_.predictor_val_fraction * rows.size()));
  const std::vector<long> val(rows.begin(), rows.begin() + n_val);
  const std::vector<long> train(rows.begin() + n_val, rows.end());
  if (train.empty()) return 0.0;

  auto eval_val = [&]() {
    double acc = 0.0;
    Eigen::MatrixXd obs(static_cast<long>(val.size()), kObservationSize);
    for (size_t j = 0; j < val.size(); ++j) obs.row(j) = ro.obs.row(val[j]);
    PolicyBundle::ForwardPass fp;
    policy_->forward_all(obs, &fp);
    for (size_t j = 0; j < val.size(); ++j)
      acc += predictor_loss_grad(fp.pred_raw.row(j).transpose(), degree,
                                 ro.futures[val[j]], cfg_.lambda_psi, nullptr);
    return acc / val.size();
  };

  const int head_n = policy_->predictor_param_count();
  const int head_off = policy_->predictor_param_offset();
  AdamOptimizer head_opt(head_n, cfg_.lr);
  Eigen::VectorXd params = policy_->get_params();
  Eigen::VectorXd head = params.segment(head_off, head_n);

  double best_ll = eval_val();
  Eigen::VectorXd best_head = head;
  int since_best = 0;
  long cursor = 0;

  for (int step = 1; step <= cfg_.predictor_max_steps; ++step) {
    const long bsz =
        std::min<long>(cfg_.batch_size, static_cast<long>(train.size()));
    Eigen::MatrixXd obs(bsz, kObservationSize);
    std::vector<long> batch(bsz);
    for (long j = 0; j < bsz; ++j) {
      batch[j] = train[cursor];
      obs.row(j) = ro.obs.row(batch[j]);
      cursor = (cursor + 1) % train.size();
    }
    PolicyBundle::ForwardPass fp;
    policy_->forward_all(obs, &fp);
    Eigen::MatrixXd d_pred = Eigen::MatrixXd::Zero(bsz, fp.pred_raw.cols());
    for (long j = 0; j < bsz; ++j) {
      Eigen::VectorXd g;
      predictor_loss_grad(fp.pred_raw.row(j).transpose(), degree,
                          ro.futures[batch[j]], cfg_.lambda_psi, &g);
      d_pred.row(j) = (-1.0 / bsz) * g.transpose();
    }
    Eigen::VectorXd head_grad = Eigen::VectorXd::Zero(head_n);
    policy_->backward_predictor_head(fp, d_pred, &head_grad);
    head_opt.step(&head, head_grad);
    params.segment(head_off, head_n) = head;
    policy_->set_params(params);

    if (step % cfg_.predictor_eval_every == 0) {
      const double ll = eval_val();
      if (ll > best_ll) {
        best_ll = ll;
        best_head = head;
        since_best = 0;
      } else if (++since_best >= cfg_.predictor_patience) {
        break;
      }
    }
  }
  params.segment(head_off, head_n) = best_head;
  policy_->set_params(params);
  return best_ll;
}

UpdateStats Trainer::run_update() {
  Rollout ro;
  ro.num_env = cfg_.num_env;
  ro.n_step = cfg_.n_step;
  ro.horizon = policy_->config().horizon;

  const size_t records_before = episode_records_.size();
  collect_rollout(&ro);
  compute_horizon_rewards(&ro);
  assemble_rewards(&ro);
  compute_advantages(&ro);

  UpdateStats stats;
  stats.update = update_idx_;
  stats.alpha_s = alpha_s_;

  double rp = 0.0, style = 0.0;
  for (long i = 0; i < ro.size(); ++i) {
    const RewardBreakdown& b = ro.breakdown[i];
    rp += b.r_p;
    style += cfg_.mode == TrainMode::kOurs ? b.r_s + b.r_s_psi : b.r_s;
  }
  stats.mean_r_p = rp / ro.size();
  stats.mean_r_s = style / ro.size();
  stats.mean_reward = ro.rewards.mean();

  ppo_update(ro, &stats);
  stats.predictor_val_ll = refine_predictor(ro);

  if (cfg_.mode == TrainMode::kOurs)
    alpha_s_ = dual_ascent_alpha(alpha_s_, cfg_.style_budget, stats.mean_r_s,
                                 cfg_.alpha_s_lr);

  stats.env_steps = env_steps_;
  stats.best_lap_time = best_lap_time_;
  double prog = 0.0, mro = 0.0;
  int finished = 0;
  for (size_t k = records_before; k < episode_records_.size(); ++k) {
    prog += episode_records_[k].progress;
    mro += episode_records_[k].mro;
    ++finished;
  }
  stats.episodes_finished = finished;
  if (finished > 0) {
    stats.mean_episode_progress = prog / finished;
    stats.mean_mro = mro / finished;
  }
  stats.alpha_s = alpha_s_;
  ++update_idx_;
  return stats;
}

void Trainer::train(const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string metrics_path = out_dir + "/metrics.csv";
  const std::string episodes_path = out_dir + "/episodes.csv";
  const bool fresh_metrics =
      !fs::exists(metrics_path) || fs::file_size(metrics_path) == 0;
  std::ofstream metrics(metrics_path, std::ios::app);
  if (fresh_metrics)
    metrics << "update,env_steps,mean_r_p,mean_r_s,mean_reward,alpha_s,"
               "approx_kl,clip_fraction,value_loss,entropy,predictor_val_ll,"
               "best_lap_time,mean_episode_progress,mean_mro,"
               "episodes_finished,kl_abort\n";
  const bool fresh_episodes =
      !fs::exists(episodes_path) || fs::file_size(episodes_path) == 0;
  std::ofstream episodes(episodes_path, std::ios::app);
  if (fresh_episodes)
    episodes << "update,env,episode,steps,progress,mean_style,mro,"
                "termination,lap_time\n";
  metrics.precision(12);
  episodes.precision(12);

  while (env_steps_ < cfg_.total_steps) {
    const UpdateStats s = run_update();
    metrics << s.update << ',' << s.env_steps << ',' << s.mean_r_p << ','
            << s.mean_r_s << ',' << s.mean_reward << ',' << s.alpha_s << ','
            << s.approx_kl << ',' << s.clip_fraction << ',' << s.value_loss
            << ',' << s.entropy << ',' << s.predictor_val_ll << ','
            << s.best_lap_time << ',' << s.mean_episode_progress << ','
            << s.mean_mro << ',' << s.episodes_finished << ','
            << (s.kl_abort ? 1 : 0) << '\n';
    metrics.flush();
    for (const EpisodeRecord& r : episode_records_) {
      episodes << r.update << ',' << r.env << ',' << r.episode << ','
               << r.steps << ',' << r.progress << ',' << r.mean_style << ','
               << r.mro << ',' << r.termination << ',' << r.lap_time << '\n';
    }
    episodes.flush();
    episode_records_.clear();
    if (cfg_.checkpoint_every > 0 &&
        (update_idx_ % cfg_.checkpoint_every == 0 ||
         env_steps_ >= cfg_.total_steps))
      save_checkpoint(out_dir + "/checkpoint.bin");
  }
  save_checkpoint(out_dir + "/checkpoint.bin");
}

PretrainStats Trainer::pretrain(const DemoDataset& demos) {
  if (demos.size() == 0) throw EmptyDataset("no demonstrations");
  const long n = demos.size();
  const int degree = policy_->config().bezier_degree;
  AdamOptimizer opt(policy_->num_params(), cfg_.pretrain_lr);
  Eigen::VectorXd params = policy_->get_params();

  PretrainStats stats;
  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg_.pretrain_epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(cfg_.seed, 6,
                                    static_cast<uint64_t>(epoch), 0));
    std::shuffle(order.begin(), order.end(), rng);
    double bc_acc = 0.0, ll_acc = 0.0;
    long ll_count = 0, batches = 0;
    for (long start = 0; start < n; start += cfg_.pretrain_batch) {
      const long bsz = std::min<long>(cfg_.pretrain_batch, n - start);
      Eigen::MatrixXd obs(bsz, kObservationSize);
      for (long j = 0; j < bsz; ++j)
        obs.row(j) = demos.observations.row(order[start + j]);
      PolicyBundle::ForwardPass fp;
      policy_->forward_all(obs, &fp);

      Eigen::MatrixXd d_mean(bsz, kActionSize);
      long n_future = 0;
      for (long j = 0; j < bsz; ++j)
        if (demos.has_future[order[start + j]]) ++n_future;
      Eigen::MatrixXd d_pred;
      if (n_future > 0)
        d_pred = Eigen::MatrixXd::Zero(bsz, fp.pred_raw.cols());

      double bc = 0.0;
      for (long j = 0; j < bsz; ++j) {
        const long i = order[start + j];
        const Eigen::Vector2d mu = fp.mean.row(j).transpose();
        const Eigen::Vector2d target =
            demos.actions.row(i).transpose();
        const Eigen::Vector2d err = mu - target;
        bc += err.squaredNorm() + cfg_.alpha_reg * mu.squaredNorm();
        d_mean.row(j) =
            (2.0 / bsz) * (err + cfg_.alpha_reg * mu).transpose();
        if (n_future > 0 && demos.has_future[i]) {
          Eigen::VectorXd g;
          const double ll =
              predictor_loss_grad(fp.pred_raw.row(j).transpose(), degree,
                                  demos.futures[i], cfg_.lambda_psi, &g);
          ll_acc += ll;
          ++ll_count;
          d_pred.row(j) = (-cfg_.alpha_psi_pt / n_future) * g.transpose();
        }
      }
      bc_acc += bc / bsz;
      ++batches;

      Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy_->num_params());
      policy_->backward_all(fp, d_mean, Eigen::MatrixXd(), d_pred,
                            Eigen::VectorXd(), &grad);
      opt.step(&params, grad);
      policy_->set_params(params);
    }
    stats.bc_loss = batches > 0 ? bc_acc / batches : 0.0;
    stats.predictor_ll = ll_count > 0 ? ll_acc / ll_count : 0.0;
    stats.epochs = epoch + 1;
  }
  return stats;
}

void Trainer::save_checkpoint(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  write_pod<uint32_t>(out, 0x53425431u);  // "SBT1"
  write_pod<int64_t>(out, update_idx_);
  write_pod<int64_t>(out, env_steps_);
  write_pod<double>(out, alpha_s_);
  write_pod<double>(out, best_lap_time_);
  policy_->save(out);
  write_pod<int64_t>(out, opt_.step_count());
  write_vec(out, opt_.m());
  write_vec(out, opt_.v());
  write_pod<int32_t>(out, cfg_.num_env);
  for (int e = 0; e < cfg_.num_env; ++e) {
    const VehicleState& s = envs_[e].state();
    write_pod<double>(out, s.position.x());
    write_pod<double>(out, s.position.y());
    write_pod<double>(out, s.heading);
    write_pod<double>(out, s.v_long);
    write_pod<double>(out, s.v_lat);
    write_pod<double>(out, s.yaw_rate);
    write_pod<double>(out, s.a_long);
    write_pod<double>(out, s.a_lat);
    write_pod<double>(out, s.slip_angle_front);
    write_pod<double>(out, s.slip_angle_rear);
    write_pod<double>(out, s.slip_ratio_front);
    write_pod<double>(out, s.slip_ratio_rear);
    write_pod<double>(out, s.current_action(0));
    write_pod<double>(out, s.current_action(1));
    write_pod<int64_t>(out, envs_[e].steps_elapsed());
    const EpisodeState& ep = ep_[e];
    write_pod<int64_t>(out, ep.episode_counter);
    write_pod<int64_t>(out, ep.steps);
    write_pod<double>(out, ep.progress);
    write_pod<double>(out, ep.style_sum);
    write_pod<double>(out, ep.offset_sum);
    write_pod<double>(out, ep.prev_s_center);
    write_pod<double>(out, ep.lap_progress);
    write_pod<double>(out, ep.lap_start_time);
    write_pod<double>(out, ep.best_lap);
  }
  if (!out) throw IoError("failed to write checkpoint: " + path);
}

void Trainer::load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  if (read_pod<uint32_t>(in) != 0x53425431u)
    throw IoError("not a checkpoint: " + path);
  update_idx_ = read_pod<int64_t>(in);
  env_steps_ = read_pod<int64_t>(in);
  alpha_s_ = read_pod<double>(in);
  best_lap_time_ = read_pod<double>(in);
  *policy_ = PolicyBundle::load(in);
  const long t = read_pod<int64_t>(in);
  const Eigen::VectorXd m = read_vec(in);
  const Eigen::VectorXd v = read_vec(in);
  opt_ = AdamOptimizer(policy_->num_params(), cfg_.lr);
  opt_.restore(m, v, t);
  const int32_t num_env = read_pod<int32_t>(in);
  if (num_env != cfg_.num_env)
    throw IoError("checkpoint env count mismatch");
  for (int e = 0; e < cfg_.num_env; ++e) {
    VehicleState s;
    s.position.x() = read_pod<double>(in);
    s.position.y() = read_pod<double>(in);
    s.heading = read_pod<double>(in);
    s.v_long = read_pod<double>(in);
    s.v_lat = read_pod<double>(in);
    s.yaw_rate = read_pod<double>(in);
    s.a_long = read_pod<double>(in);
    s.a_lat = read_pod<double>(in);
    s.slip_angle_front = read_pod<double>(in);
    s.slip_angle_rear = read_pod<double>(in);
    s.slip_ratio_front = read_pod<double>(in);
    s.slip_ratio_rear = read_pod<double>(in);
    s.current_action(0) = read_pod<double>(in);
    s.current_action(1) = read_pod<double>(in);
    const long steps_elapsed = read_pod<int64_t>(in);
    EpisodeState ep;
    ep.episode_counter = read_pod<int64_t>(in);
    ep.steps = read_pod<int64_t>(in);
    ep.progress = read_pod<double>(in);
    ep.style_sum = read_pod<double>(in);
    ep.offset_sum = read_pod<double>(in);
    ep.prev_s_center = read_pod<double>(in);
    ep.lap_progress = read_pod<double>(in);
    ep.lap_start_time = read_pod<double>(in);
    ep.best_lap = read_pod<double>(in);
    ep_[e] = ep;
    const uint64_t ref_seed = derive_seed(
        cfg_.seed, 5, static_cast<uint64_t>(e),
        static_cast<uint64_t>(ep.episode_counter));
    envs_[e].reset(sample_reference(rtd_, track_, ref_seed));
    envs_[e].set_state(s, steps_elapsed);
  }
  episode_records_.clear();
}

}  // namespace sbrl
