#ifndef SBRL_BEZIER_HPP_
#define SBRL_BEZIER_HPP_

#include <Eigen/Dense>
#include <vector>

namespace sbrl {

// Minimum control-point standard deviation (meters).
inline constexpr double kBezierStdFloor = 1e-3;
// Variance floor for the per-step Gaussian log-density.
inline constexpr double kVarianceFloor = 1e-12;

/// Gaussian control points of a probabilistic Bezier curve in the car-local
/// frame. The first control point is the current vehicle position, fixed at
/// the origin with zero covariance and not stored: mu/log_std hold the
/// learned points P_1..P_M for a curve of degree M.
struct BezierParams {
  int degree = 5;
  std::vector<Eigen::Vector2d> mu;       // M planar means
  std::vector<Eigen::Vector2d> log_std;  // M per-axis log stddevs

  // Packed network-head layout: M*2 means followed by M*2 log-stds.
  static BezierParams unpack(const Eigen::VectorXd& raw, int degree);
  Eigen::VectorXd pack() const;
  static int packed_size(int degree) { return 4 * degree; }
};

/// H Gaussian marginals evaluated at phases t_i = i/H.
struct BezierPrediction {
  std::vector<Eigen::Vector2d> means;  // H
  std::vector<Eigen::Vector2d> vars;   // H diagonal variances
  int horizon() const { return static_cast<int>(means.size()); }
};

// Bernstein polynomial b_{i,M}(t) = C(M,i) (1-t)^{M-i} t^i.
double bernstein(int i, int degree, double t);

// Mean and diagonal covariance along the curve at t_i = i/H, i = 1..H.
BezierPrediction evaluate(const BezierParams& params, int horizon);

// Full 2-D Gaussian log-density of `target` under a diagonal covariance,
// including the -log(2*pi) constant.
double step_log_likelihood(const Eigen::Vector2d& mean,
                           const Eigen::Vector2d& var,
                           const Eigen::Vector2d& target);

// Recency-weighted per-trajectory likelihood, averaged over the batch:
//   mean_j [ sum_i lambda^(i-1) l_i / sum_i lambda^(i-1) ].
// Returned as a quantity to MAXIMIZE.
double predictor_loss(const std::vector<BezierPrediction>& predictions,
                      const std::vector<std::vector<Eigen::Vector2d>>& targets,
                      double lambda_psi);

// Loss and gradient with respect to the packed head outputs of one
// trajectory (weighted horizon mean, to maximize). Used by the trainers.
double predictor_loss_grad(const Eigen::VectorXd& raw, int degree,
                           const std::vector<Eigen::Vector2d>& target,
                           double lambda_psi, Eigen::VectorXd* grad);

}  // namespace sbrl

#endif  // SBRL_BEZIER_HPP_
