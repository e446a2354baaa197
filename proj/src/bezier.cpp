#include "sbrl/bezier.hpp"

#include <cmath>

#include "sbrl/errors.hpp"

namespace sbrl {

double bernstein(int i, int degree, double t) {
  if (i < 0 || i > degree || degree < 0)
    throw IndexOutOfRange("bernstein index outside [0, M]");
  // Binomial coefficient via multiplicative formula; M stays small here.
  double binom = 1.0;
  for (int k = 1; k <= i; ++k)
    binom = binom * (degree - k + 1) / k;
  return binom * std::pow(1.0 - t, degree - i) * std::pow(t, i);
}

BezierParams BezierParams::unpack(const Eigen::VectorXd& raw, int degree) {
  if (raw.size() != packed_size(degree))
    throw ShapeMismatch("packed Bezier parameter size mismatch");
  BezierParams p;
  p.degree = degree;
  p.mu.resize(degree);
  p.log_std.resize(degree);
  for (int j = 0; j < degree; ++j) {
    p.mu[j] = Eigen::Vector2d(raw(2 * j), raw(2 * j + 1));
    p.log_std[j] =
        Eigen::Vector2d(raw(2 * degree + 2 * j), raw(2 * degree + 2 * j + 1));
  }
  return p;
}

Eigen::VectorXd BezierParams::pack() const {
  Eigen::VectorXd raw(packed_size(degree));
  for (int j = 0; j < degree; ++j) {
    raw(2 * j) = mu[j].x();
    raw(2 * j + 1) = mu[j].y();
    raw(2 * degree + 2 * j) = log_std[j].x();
    raw(2 * degree + 2 * j + 1) = log_std[j].y();
  }
  return raw;
}

BezierPrediction evaluate(const BezierParams& params, int horizon) {
  if (horizon < 1) throw OutOfRange("horizon must be >= 1");
  const int m = params.degree;
  BezierPrediction pred;
  pred.means.resize(horizon);
  pred.vars.resize(horizon);
  for (int i = 1; i <= horizon; ++i) {
    const double t = static_cast<double>(i) / horizon;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Vector2d var = Eigen::Vector2d::Zero();
    // P_0 sits at the origin with zero covariance and drops out of the sums.
    for (int j = 1; j <= m; ++j) {
      const double b = bernstein(j, m, t);
      mean += b * params.mu[j - 1];
      const Eigen::Vector2d std_j =
          params.log_std[j - 1].array().exp().max(kBezierStdFloor).matrix();
      var += (b * b) * std_j.cwiseProduct(std_j);
    }
    pred.means[i - 1] = mean;
    pred.vars[i - 1] = var;
  }
  return pred;
}

double step_log_likelihood(const Eigen::Vector2d& mean,
                           const Eigen::Vector2d& var,
                           const Eigen::Vector2d& target) {
  double ll = -std::log(2.0 * M_PI);
  for (int k = 0; k < 2; ++k) {
    if (var(k) <= 0.0)
      throw SingularCovariance("non-positive predicted variance");
    const double v = std::max(var(k), kVarianceFloor);
    const double r = mean(k) - target(k);
    ll -= 0.5 * (r * r / v + std::log(v));
  }
  return ll;
}

double predictor_loss(const std::vector<BezierPrediction>& predictions,
                      const std::vector<std::vector<Eigen::Vector2d>>& targets,
                      double lambda_psi) {
  if (predictions.empty()) throw EmptyBatch("no predictions");
  if (predictions.size() != targets.size())
    throw ShapeMismatch("prediction/target batch size mismatch");
  double total = 0.0;
  for (size_t j = 0; j < predictions.size(); ++j) {
    const BezierPrediction& pred = predictions[j];
    const auto& traj = targets[j];
    if (static_cast<int>(traj.size()) != pred.horizon())
      throw ShapeMismatch("target horizon mismatch");
    double num = 0.0, den = 0.0, w = 1.0;
    for (int i = 0; i < pred.horizon(); ++i) {
      num += w * step_log_likelihood(pred.means[i], pred.vars[i], traj[i]);
      den += w;
      w *= lambda_psi;
    }
    total += num / den;
  }
  return total / static_cast<double>(predictions.size());
}

double predictor_loss_grad(const Eigen::VectorXd& raw, int degree,
                           const std::vector<Eigen::Vector2d>& target,
                           double lambda_psi, Eigen::VectorXd* grad) {
  const BezierParams params = BezierParams::unpack(raw, degree);
  const int h = static_cast<int>(target.size());
  const int m = degree;

  // Per-control-point effective variances (floored stds).
  std::vector<Eigen::Vector2d> std_j(m), var_j(m);
  std::vector<bool> std_active_x(m), std_active_y(m);
  for (int j = 0; j < m; ++j) {
    const Eigen::Vector2d e = params.log_std[j].array().exp().matrix();
    std_j[j] = e.cwiseMax(kBezierStdFloor);
    var_j[j] = std_j[j].cwiseProduct(std_j[j]);
    std_active_x[j] = e.x() > kBezierStdFloor;
    std_active_y[j] = e.y() > kBezierStdFloor;
  }

  if (grad) grad->setZero(BezierParams::packed_size(degree));
  double num = 0.0, den = 0.0, w = 1.0;
  std::vector<double> weights(h);
  for (int i = 0; i < h; ++i) {
    weights[i] = w;
    den += w;
    w *= lambda_psi;
  }

  std::vector<double> b(m + 1);
  for (int i = 1; i <= h; ++i) {
    const double t = static_cast<double>(i) / h;
    for (int j = 1; j <= m; ++j) b[j] = bernstein(j, m, t);
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Vector2d var = Eigen::Vector2d::Zero();
    for (int j = 1; j <= m; ++j) {
      mean += b[j] * params.mu[j - 1];
      var += (b[j] * b[j]) * var_j[j - 1];
    }
    double ll = -std::log(2.0 * M_PI);
    Eigen::Vector2d dll_dmean, dll_dvar;
    bool var_floored[2];
    for (int k = 0; k < 2; ++k) {
      var_floored[k] = var(k) < kVarianceFloor;
      const double v = std::max(var(k), kVarianceFloor);
      const double r = mean(k) - target[i - 1](k);
      ll -= 0.5 * (r * r / v + std::log(v));
      dll_dmean(k) = -r / v;
      dll_dvar(k) = var_floored[k] ? 0.0 : 0.5 * (r * r / (v * v) - 1.0 / v);
    }
    num += weights[i - 1] * ll;
    if (grad) {
      const double scale = weights[i - 1];
      for (int j = 1; j <= m; ++j) {
        const int mu_base = 2 * (j - 1);
        const int ls_base = 2 * m + 2 * (j - 1);
        (*grad)(mu_base) += scale * b[j] * dll_dmean.x();
        (*grad)(mu_base + 1) += scale * b[j] * dll_dmean.y();
        // d var / d log_std = 2 sigma^2 b^2 where the exp is above the floor.
        if (std_active_x[j - 1])
          (*grad)(ls_base) +=
              scale * dll_dvar.x() * b[j] * b[j] * 2.0 * var_j[j - 1].x();
        if (std_active_y[j - 1])
          (*grad)(ls_base + 1) +=
              scale * dll_dvar.y() * b[j] * b[j] * 2.0 * var_j[j - 1].y();
      }
    }
  }
  if (grad) *grad /= den;
  return num / den;
}

}  // namespace sbrl
