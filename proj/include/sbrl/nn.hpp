#ifndef SBRL_NN_HPP_
#define SBRL_NN_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace sbrl {

enum class OutputActivation { kIdentity, kRelu };

/// Dense feed-forward network, ReLU on hidden layers. Batches are row-major:
/// each row of the input matrix is one sample. All math in 64-bit floats.
class DenseNetwork {
 public:
  DenseNetwork() = default;
  DenseNetwork(std::vector<int> layer_sizes,
               OutputActivation out_act = OutputActivation::kIdentity);

  // Orthogonal init, gain sqrt(2) on hidden layers by default.
  void init_orthogonal(std::mt19937_64& rng, double hidden_gain,
                       double output_gain);

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }

  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // [0]=input, [l]=post layer l
    bool valid = false;
  };

  struct Grads {
    std::vector<Eigen::MatrixXd> dw;
    std::vector<Eigen::VectorXd> db;
    bool empty() const { return dw.empty(); }
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input,
                          Cache* cache = nullptr) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;

  // Reverse-mode pass. `output_grad` holds dL/dy per row; gradients are
  // accumulated into `grads` (allocated on first use) and dL/dx is returned.
  Eigen::MatrixXd backward(const Cache& cache,
                           const Eigen::MatrixXd& output_grad,
                           Grads* grads) const;

  Grads zero_grads() const;

  int num_params() const;
  // Flat parameter order: per layer, row-major W then b.
  void get_params(Eigen::VectorXd* out, int offset) const;
  void set_params(const Eigen::VectorXd& in, int offset);
  static void flatten_grads(const Grads& grads, Eigen::VectorXd* out,
                            int offset);

  const std::vector<Eigen::MatrixXd>& weights() const { return w_; }
  std::vector<Eigen::MatrixXd>& weights() { return w_; }
  const std::vector<Eigen::VectorXd>& biases() const { return b_; }
  std::vector<Eigen::VectorXd>& biases() { return b_; }

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> w_;  // out x in
  std::vector<Eigen::VectorXd> b_;
  OutputActivation out_act_ = OutputActivation::kIdentity;
};

/// Adaptive-moment optimizer over a flat parameter vector.
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  explicit AdamOptimizer(int dim, double learning_rate, double beta1 = 0.9,
                         double beta2 = 0.999, double eps = 1e-8);

  void step(Eigen::VectorXd* params, const Eigen::VectorXd& grad);

  long step_count() const { return t_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  const Eigen::VectorXd& m() const { return m_; }
  const Eigen::VectorXd& v() const { return v_; }
  void restore(const Eigen::VectorXd& m, const Eigen::VectorXd& v, long t);

 private:
  Eigen::VectorXd m_, v_;
  long t_ = 0;
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
};

// Diagonal-Gaussian action distribution with state-independent log-std.
// Stds are clamped into [1e-4, 10] wherever they are used.
inline constexpr double kLogStdMin = -9.210340371976182;  // log(1e-4)
inline constexpr double kLogStdMax = 2.302585092994046;   // log(10)

Eigen::VectorXd clamped_std(const Eigen::VectorXd& log_std);

double gaussian_log_prob(const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std,
                         const Eigen::VectorXd& action);

Eigen::VectorXd gaussian_sample(const Eigen::VectorXd& mean,
                                const Eigen::VectorXd& log_std,
                                std::mt19937_64& rng);

double gaussian_entropy(const Eigen::VectorXd& log_std);

}  // namespace sbrl

#endif  // SBRL_NN_HPP_
