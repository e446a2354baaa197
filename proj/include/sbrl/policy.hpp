#ifndef SBRL_POLICY_HPP_
#define SBRL_POLICY_HPP_

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "sbrl/bezier.hpp"
#include "sbrl/config.hpp"
#include "sbrl/env.hpp"
#include "sbrl/nn.hpp"

namespace sbrl {

/// Network widths for the actor-critic bundle. Defaults are the full-scale
/// sizes; the [policy] config section can shrink them for quick experiments.
struct PolicyConfig {
  std::vector<int> extractor_hidden{512, 512};
  std::vector<int> policy_hidden{128, 128};
  std::vector<int> value_hidden{512, 512};
  std::vector<int> predictor_hidden{128, 128};
  int bezier_degree = 5;
  int horizon = 100;
  double log_std_init = std::log(0.05);

  static PolicyConfig from_config(const Config& cfg);
};

/// Shared feature extractor with three heads:
///   - policy mean (2 relative action increments, diagonal Gaussian with a
///     state-independent learned log-std),
///   - state value,
///   - probabilistic curve predictor (packed control-point parameters).
class PolicyBundle {
 public:
  PolicyBundle() = default;
  explicit PolicyBundle(const PolicyConfig& cfg, std::mt19937_64& rng);

  const PolicyConfig& config() const { return cfg_; }
  int latent_size() const { return extractor_.output_size(); }
  int predictor_output_size() const {
    return BezierParams::packed_size(cfg_.bezier_degree);
  }

  struct ActResult {
    Eigen::Vector2d action;
    double log_prob = 0.0;
    double value = 0.0;
  };
  // Single-observation sampling path used during rollouts.
  ActResult act(const Eigen::VectorXd& obs, std::mt19937_64& rng) const;
  Eigen::Vector2d act_mean(const Eigen::VectorXd& obs) const;
  double value_of(const Eigen::VectorXd& obs) const;
  Eigen::VectorXd predict_raw(const Eigen::VectorXd& obs) const;

  struct ForwardPass {
    DenseNetwork::Cache extractor, policy, value, predictor;
    Eigen::MatrixXd latent, mean, values, pred_raw;
  };
  void forward_all(const Eigen::MatrixXd& obs, ForwardPass* fp) const;

  // Backward through the heads and the shared extractor. Any of the head
  // gradients may be empty (zero rows) to skip that head. Gradients are
  // accumulated into `grad` using the flat layout below.
  void backward_all(const ForwardPass& fp, const Eigen::MatrixXd& d_mean,
                    const Eigen::MatrixXd& d_values,
                    const Eigen::MatrixXd& d_pred_raw,
                    const Eigen::VectorXd& d_log_std,
                    Eigen::VectorXd* grad) const;

  // Predictor-head-only backward: leaves the extractor untouched.
  void backward_predictor_head(const ForwardPass& fp,
                               const Eigen::MatrixXd& d_pred_raw,
                               Eigen::VectorXd* grad) const;

  // Flat parameter layout: extractor, policy head, value head, predictor
  // head (each per layer, row-major W then b), then the 2 log-std entries.
  int num_params() const;
  Eigen::VectorXd get_params() const;
  void set_params(const Eigen::VectorXd& flat);

  // Offset of the predictor head inside the flat vector, and its length.
  int predictor_param_offset() const;
  int predictor_param_count() const { return predictor_.num_params(); }

  const Eigen::VectorXd& log_std() const { return log_std_; }
  Eigen::VectorXd& log_std() { return log_std_; }

  void save(std::ostream& out) const;
  static PolicyBundle load(std::istream& in);

 private:
  PolicyConfig cfg_;
  DenseNetwork extractor_;  // obs -> latent, ReLU output
  DenseNetwork policy_;     // latent -> 2
  DenseNetwork value_;      // latent -> 1
  DenseNetwork predictor_;  // latent -> 4 * degree
  Eigen::VectorXd log_std_{Eigen::VectorXd::Zero(kActionSize)};
};

}  // namespace sbrl

#endif  // SBRL_POLICY_HPP_
