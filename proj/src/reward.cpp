#include "sbrl/reward.hpp"

#include <cmath>

namespace sbrl {

RewardConfig RewardConfig::from_config(const Config& cfg) {
  RewardConfig r;
  r.alpha_d = cfg.get_double("reward.alpha_d", r.alpha_d);
  r.alpha_psi = cfg.get_double("reward.alpha_psi", r.alpha_psi);
  r.n_mc = cfg.get_int("reward.n_mc", r.n_mc);
  r.penalty_off_track =
      cfg.get_double("reward.penalty_off_track", r.penalty_off_track);
  r.penalty_spin = cfg.get_double("reward.penalty_spin", r.penalty_spin);
  r.penalty_slow = cfg.get_double("reward.penalty_slow", r.penalty_slow);
  return r;
}

double RewardConfig::penalty_for(Termination t) const {
  switch (t) {
    case Termination::kOffTrack:
      return penalty_off_track;
    case Termination::kSpin:
      return penalty_spin;
    case Termination::kSlow:
      return penalty_slow;
    default:
      return 0.0;
  }
}

double RewardConfig::horizon_style_bound(int horizon) const {
  return alpha_psi * (1.0 - std::pow(alpha_psi, horizon)) / (1.0 - alpha_psi);
}

double progress_reward(const Vec2& pos_t, const Vec2& pos_next,
                       const ArcLengthCurve& tau) {
  const Projection from = tau.project(pos_t);
  const Projection to = tau.project(pos_next);
  return tau.progress(from.s, to.s);
}

double style_reward(const Vec2& pos, const ArcLengthCurve& tau,
                    double alpha_d) {
  const Projection p = tau.project(pos);
  const double d2 = (pos - p.foot).squaredNorm();
  return std::exp(-alpha_d * d2);
}

namespace {

// Draw from a diagonal Gaussian in the car-local frame and place in world.
Vec2 sample_world_point(const Eigen::Vector2d& mean,
                        const Eigen::Vector2d& var, const Pose& pose,
                        std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Vec2 local(mean.x() + std::sqrt(var.x()) * normal(rng),
                   mean.y() + std::sqrt(var.y()) * normal(rng));
  return from_local(pose, local);
}

}  // namespace

double horizon_progress_reward(const BezierPrediction& pred, const Pose& pose,
                               const ArcLengthCurve& tau,
                               const RewardConfig& cfg, std::mt19937_64& rng) {
  const int h = pred.horizon();
  const double s_t = tau.project(pose.position).s;
  double acc = 0.0;
  for (int n = 0; n < cfg.n_mc; ++n) {
    const Vec2 p =
        sample_world_point(pred.means[h - 1], pred.vars[h - 1], pose, rng);
    acc += tau.progress(s_t, tau.project(p).s);
  }
  return acc / cfg.n_mc;
}

double horizon_style_reward(const BezierPrediction& pred, const Pose& pose,
                            const ArcLengthCurve& tau, const RewardConfig& cfg,
                            std::mt19937_64& rng) {
  double total = 0.0;
  double w = cfg.alpha_psi;
  for (int i = 0; i < pred.horizon(); ++i, w *= cfg.alpha_psi) {
    if (w < 1e-8) break;
    double acc = 0.0;
    for (int n = 0; n < cfg.n_mc; ++n) {
      const Vec2 p = sample_world_point(pred.means[i], pred.vars[i], pose, rng);
      const Projection proj = tau.project(p);
      acc += std::exp(-cfg.alpha_d * (p - proj.foot).squaredNorm());
    }
    total += w * acc / cfg.n_mc;
  }
  return total;
}

double combine(const RewardBreakdown& b, double alpha_s) {
  return b.r_p + b.r_p_psi + alpha_s * (b.r_s + b.r_s_psi) + b.penalty;
}

}  // namespace sbrl
