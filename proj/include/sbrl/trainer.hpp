#ifndef SBRL_TRAINER_HPP_
#define SBRL_TRAINER_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sbrl/config.hpp"
#include "sbrl/env.hpp"
#include "sbrl/policy.hpp"
#include "sbrl/reward.hpp"
#include "sbrl/rtd.hpp"

namespace sbrl {

/// Reward composition modes.
///   kOurs: progress + horizon progress + alpha_s * (style + horizon style),
///          with the dual update of alpha_s active.
///   kStep: progress + fixed alpha_s * per-step style, no horizon terms.
///   kCrl:  progress and penalties only.
enum class TrainMode { kOurs, kStep, kCrl };

TrainMode parse_mode(const std::string& name);
std::string mode_name(TrainMode mode);

struct TrainerConfig {
  TrainMode mode = TrainMode::kOurs;
  int num_env = 8;
  int n_step = 1024;           // steps per environment per update
  long total_steps = 500000;   // environment steps over the whole run
  double gamma = 0.998;
  double gae_lambda = 0.98;
  double lr = 1e-4;
  double clip_range = 0.2;
  double ent_coef = 1e-5;
  double vf_coef = 1.25;
  int n_opt_epoch = 4;
  int batch_size = 1024;
  double kl_threshold = 0.1;
  double lambda_psi = 1.0;     // recency weight inside the prediction loss
  double aux_psi_coef = 1.0;   // weight of the prediction term in the update
  double alpha_s_init = 0.5;
  double alpha_s_lr = 1e-4;
  double style_budget = 3.0;   // per-step style return target
  int checkpoint_every = 10;   // updates between checkpoints
  uint64_t seed = 0;

  // Post-rollout predictor refinement (head only).
  double predictor_val_fraction = 0.1;
  int predictor_patience = 3;
  int predictor_max_steps = 200;
  int predictor_eval_every = 10;

  // Behavior-cloning pretraining.
  double pretrain_lr = 1e-3;
  int pretrain_batch = 128;
  int pretrain_epochs = 20;
  double alpha_reg = 1.0;
  double alpha_psi_pt = 1e-6;

  static TrainerConfig from_config(const Config& cfg);
};

/// Expert demonstrations: observations, action increments, and the realized
/// car-local future positions used as prediction targets.
struct DemoDataset {
  Eigen::MatrixXd observations;              // N x 77
  Eigen::MatrixXd actions;                   // N x 2 increments
  std::vector<std::vector<Eigen::Vector2d>> futures;  // per row, H entries
  std::vector<char> has_future;

  long size() const { return observations.rows(); }
};

// Generalized advantage estimation over one environment's reward sequence.
// `dones[t]` marks a terminal transition at step t (no bootstrap across it);
// `last_value` bootstraps the tail when the rollout ends mid-episode.
void gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
         const std::vector<char>& dones, double last_value, double gamma,
         double lambda, Eigen::VectorXd* advantages, Eigen::VectorXd* returns);

// One dual-ascent step on the style multiplier:
// alpha <- max(0, alpha + lr * (budget - mean_style)).
double dual_ascent_alpha(double alpha, double budget, double mean_style,
                         double lr);

// Deterministic stream seeds derived from (run seed, purpose, counters).
uint64_t derive_seed(uint64_t seed, uint64_t purpose, uint64_t a,
                     uint64_t b = 0);

struct UpdateStats {
  long update = 0;
  long env_steps = 0;
  double mean_r_p = 0.0;
  double mean_r_s = 0.0;       // per-step style total entering the constraint
  double mean_reward = 0.0;
  double alpha_s = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double predictor_val_ll = 0.0;
  double best_lap_time = -1.0;  // negative when no lap finished yet
  double mean_episode_progress = 0.0;
  double mean_mro = 0.0;        // mean offset from the style reference
  int episodes_finished = 0;
  bool kl_abort = false;
};

struct PretrainStats {
  double bc_loss = 0.0;
  double predictor_ll = 0.0;
  int epochs = 0;
};

class Trainer {
 public:
  Trainer(Track track, TrajectoryDistributionModel rtd, PolicyBundle policy,
          TrainerConfig cfg, RewardConfig reward_cfg, VehicleParams vehicle);

  PretrainStats pretrain(const DemoDataset& demos);

  // One full iteration: rollout, horizon rewards, advantage estimation,
  // clipped policy optimization, predictor refinement, dual update.
  UpdateStats run_update();

  // Runs updates until total_steps, writing metrics.csv / episodes.csv and
  // periodic checkpoints under out_dir.
  void train(const std::string& out_dir);

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

  const PolicyBundle& policy() const { return *policy_; }
  PolicyBundle& policy() { return *policy_; }
  double alpha_s() const { return alpha_s_; }
  void set_alpha_s(double a) { alpha_s_ = a; }
  long update_index() const { return update_idx_; }
  long env_steps() const { return env_steps_; }
  const TrainerConfig& config() const { return cfg_; }
  const Track& track() const { return track_; }
  const TrajectoryDistributionModel& rtd() const { return rtd_; }

  // Episode bookkeeping for one rollout worker.
  struct EpisodeState {
    long episode_counter = 0;
    long steps = 0;
    double progress = 0.0;      // accumulated centerline progress
    double style_sum = 0.0;
    double offset_sum = 0.0;    // |distance to reference| accumulator
    double prev_s_center = 0.0;
    double lap_progress = 0.0;  // resets every completed lap
    double lap_start_time = 0.0;
    double best_lap = -1.0;     // best lap time inside this episode
  };

  struct EpisodeRecord {
    long update = 0;
    int env = 0;
    long episode = 0;
    long steps = 0;
    double progress = 0.0;
    double mean_style = 0.0;
    double mro = 0.0;
    int termination = 0;
    double lap_time = -1.0;  // best lap inside the episode, if any
  };
  const std::vector<EpisodeRecord>& episode_records() const {
    return episode_records_;
  }

 private:
  struct Rollout;
  void reset_env(int e, bool increment_episode);
  void collect_rollout(Rollout* ro);
  void compute_horizon_rewards(Rollout* ro);
  void assemble_rewards(Rollout* ro);
  void compute_advantages(Rollout* ro);
  void ppo_update(const Rollout& ro, UpdateStats* stats);
  double refine_predictor(const Rollout& ro);

  Track track_;
  TrajectoryDistributionModel rtd_;
  std::unique_ptr<PolicyBundle> policy_;
  TrainerConfig cfg_;
  RewardConfig reward_cfg_;
  VehicleParams vehicle_;

  std::vector<RaceEnv> envs_;
  std::vector<EpisodeState> ep_;
  double alpha_s_ = 0.5;
  long update_idx_ = 0;
  long env_steps_ = 0;
  double best_lap_time_ = -1.0;
  AdamOptimizer opt_;
  std::vector<EpisodeRecord> episode_records_;
};

}  // namespace sbrl

#endif  // SBRL_TRAINER_HPP_
