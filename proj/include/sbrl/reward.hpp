#ifndef SBRL_REWARD_HPP_
#define SBRL_REWARD_HPP_

#include <random>

#include "sbrl/bezier.hpp"
#include "sbrl/config.hpp"
#include "sbrl/env.hpp"
#include "sbrl/geometry.hpp"

namespace sbrl {

struct RewardConfig {
  double alpha_d = 0.01;    // style distance scale, 1/m^2
  double alpha_psi = 0.8;   // horizon discount
  int n_mc = 8;             // Monte Carlo samples per horizon marginal
  double penalty_off_track = -5.0;
  double penalty_spin = -5.0;
  double penalty_slow = -2.0;

  static RewardConfig from_config(const Config& cfg);
  double penalty_for(Termination t) const;
  // Upper bound of the horizon style reward: alpha_psi (1-alpha_psi^H)/(1-alpha_psi).
  double horizon_style_bound(int horizon) const;
};

struct RewardBreakdown {
  double r_p = 0.0;
  double r_s = 0.0;
  double r_p_psi = 0.0;
  double r_s_psi = 0.0;
  double penalty = 0.0;
};

// Signed progress between the projections of two positions onto tau.
double progress_reward(const Vec2& pos_t, const Vec2& pos_next,
                       const ArcLengthCurve& tau);

// exp(-alpha_d * d^2), d = distance to the projection foot.
double style_reward(const Vec2& pos, const ArcLengthCurve& tau,
                    double alpha_d);

// Monte Carlo estimate of the expected progress of the final horizon
// marginal (telescoped form). The prediction is car-local; `pose` places it
// in the world.
double horizon_progress_reward(const BezierPrediction& pred, const Pose& pose,
                               const ArcLengthCurve& tau,
                               const RewardConfig& cfg, std::mt19937_64& rng);

// sum_i alpha_psi^i E[exp(-alpha_d d^2)] over the horizon marginals;
// negligible tail terms (alpha_psi^i < 1e-8) are skipped.
double horizon_style_reward(const BezierPrediction& pred, const Pose& pose,
                            const ArcLengthCurve& tau, const RewardConfig& cfg,
                            std::mt19937_64& rng);

// r_p + r_p_psi + alpha_s * (r_s + r_s_psi) + penalty.
double combine(const RewardBreakdown& b, double alpha_s);

}  // namespace sbrl

#endif  // SBRL_REWARD_HPP_
