#ifndef SBRL_RTD_HPP_
#define SBRL_RTD_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "sbrl/geometry.hpp"

namespace sbrl {

/// Gaussian radial basis over lap phase in [0,1], equidistant centers.
/// Periodic bases wrap the phase distance so closed-lap fits are seamless.
struct RBFBasis {
  int n_basis = 20;
  double bandwidth = 0.075;  // phase units; default 1.5x center spacing
  double ridge = 1e-6;
  bool periodic = true;
  // Empty means equidistant centers; non-empty overrides them (tests use
  // this to force degenerate bases).
  std::vector<double> custom_centers;

  static RBFBasis make(int n_basis, bool periodic, double ridge = 1e-6);

  double center(int j) const;
  double value(int j, double phase) const;
  // Row of basis values at one phase.
  Eigen::RowVectorXd row(double phase) const;
};

/// RBF weights of one demonstration: lateral offset and speed vs. phase.
struct TrajectoryWeights {
  Eigen::VectorXd w_lateral;
  Eigen::VectorXd w_speed;
};

struct WeightFit {
  TrajectoryWeights weights;
  double rms_lateral = 0.0;
  double rms_speed = 0.0;
};

/// Gaussian over stacked [w_lateral; w_speed] coefficients (the RTD).
struct TrajectoryDistributionModel {
  Eigen::VectorXd mu_w;
  Eigen::MatrixXd sigma_w;
  RBFBasis basis;
  std::string track_binding;
  // Feasibility guards applied when reconstructing sampled references.
  double v_floor = 3.0;
  double v_cap = 100.0;
  double lateral_margin = 0.9;  // fraction of local half width
};

// Ridge least-squares fit of (lateral offset, speed) vs. centerline phase.
WeightFit fit_weights(const ReferenceTrajectory& demo, const Track& track,
                      const RBFBasis& basis);

// Sample mean + unbiased sample covariance over stacked weights, plus a
// trace-scaled jitter on the diagonal.
TrajectoryDistributionModel fit_rtd(const std::vector<TrajectoryWeights>& ws,
                                    const RBFBasis& basis,
                                    const std::string& track_binding,
                                    double jitter_scale = 1e-8);

// Reconstructs the lateral/speed functions for a weight vector at one phase.
// No feasibility clamping; used by sampling and by linearity tests.
double reconstruct_lateral(const RBFBasis& basis, const Eigen::VectorXd& w_lat,
                           double phase);
double reconstruct_speed(const RBFBasis& basis, const Eigen::VectorXd& w_speed,
                         double phase);

// Draws w ~ N(mu_w, sigma_w) and maps it to a feasible reference trajectory
// on the track (lateral clamped into bounds, speed clamped to
// [v_floor, v_cap]). Deterministic given the seed.
ReferenceTrajectory sample_reference(const TrajectoryDistributionModel& model,
                                     const Track& track, uint64_t seed);

// Reconstruction of the mean weights (no sampling noise).
ReferenceTrajectory reconstruct_reference(
    const TrajectoryDistributionModel& model, const Track& track,
    const Eigen::VectorXd& w);

void save_rtd(const TrajectoryDistributionModel& model,
              const std::string& path);
TrajectoryDistributionModel load_rtd(const std::string& path);

}  // namespace sbrl

#endif  // SBRL_RTD_HPP_
