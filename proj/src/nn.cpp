#include "sbrl/nn.hpp"

#include <cmath>

#include "sbrl/errors.hpp"

namespace sbrl {

DenseNetwork::DenseNetwork(std::vector<int> layer_sizes,
                           OutputActivation out_act)
    : sizes_(std::move(layer_sizes)), out_act_(out_act) {
  if (sizes_.size() < 2) throw ShapeMismatch("need at least input and output");
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    w_.emplace_back(Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]));
    b_.emplace_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
  }
}

namespace {

// Orthogonal matrix via QR of a Gaussian draw, sign-fixed by diag(R).
Eigen::MatrixXd orthogonal_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = std::max(rows, cols);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q.topLeftCorner(rows, cols);
}

}  // namespace

void DenseNetwork::init_orthogonal(std::mt19937_64& rng, double hidden_gain,
                                   double output_gain) {
  for (size_t l = 0; l < w_.size(); ++l) {
    const double gain = (l + 1 == w_.size() &&
                         out_act_ == OutputActivation::kIdentity)
                            ? output_gain
                            : hidden_gain;
    w_[l] = gain * orthogonal_matrix(static_cast<int>(w_[l].rows()),
                                     static_cast<int>(w_[l].cols()), rng);
    b_[l].setZero();
  }
}

Eigen::MatrixXd DenseNetwork::forward(const Eigen::MatrixXd& input,
                                      Cache* cache) const {
  if (input.cols() != sizes_.front())
    throw ShapeMismatch("input width " + std::to_string(input.cols()) +
                        " != " + std::to_string(sizes_.front()));
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(input);
  }
  Eigen::MatrixXd a = input;
  for (size_t l = 0; l < w_.size(); ++l) {
    Eigen::MatrixXd z =
        (a * w_[l].transpose()).rowwise() + b_[l].transpose();
    const bool relu = (l + 1 < w_.size()) ||
                      out_act_ == OutputActivation::kRelu;
    if (relu) z = z.cwiseMax(0.0);
    a = std::move(z);
    if (cache) cache->activations.push_back(a);
  }
  if (cache) cache->valid = true;
  return a;
}

Eigen::VectorXd DenseNetwork::forward(const Eigen::VectorXd& input) const {
  return forward(Eigen::MatrixXd(input.transpose())).row(0).transpose();
}

DenseNetwork::Grads DenseNetwork::zero_grads() const {
  Grads g;
  for (size_t l = 0; l < w_.size(); ++l) {
    g.dw.emplace_back(Eigen::MatrixXd::Zero(w_[l].rows(), w_[l].cols()));
    g.db.emplace_back(Eigen::VectorXd::Zero(b_[l].size()));
  }
  return g;
}

Eigen::MatrixXd DenseNetwork::backward(const Cache& cache,
                                       const Eigen::MatrixXd& output_grad,
                                       Grads* grads) const {
  if (!cache.valid) throw StaleCache("forward pass not cached");
  if (grads && grads->empty()) *grads = zero_grads();
  Eigen::MatrixXd delta = output_grad;
  for (int l = static_cast<int>(w_.size()) - 1; l >= 0; --l) {
    const bool relu = (l + 1 < static_cast<int>(w_.size())) ||
                      out_act_ == OutputActivation::kRelu;
    if (relu) {
      // Post-activation values > 0 mark active units.
      delta = delta.cwiseProduct(
          (cache.activations[l + 1].array() > 0.0).cast<double>().matrix());
    }
    if (grads) {
      grads->dw[l].noalias() += delta.transpose() * cache.activations[l];
      grads->db[l] += delta.colwise().sum().transpose();
    }
    if (l > 0) delta = delta * w_[l];
    else delta = delta * w_[0];  // input gradient
  }
  return delta;
}

int DenseNetwork::num_params() const {
  int n = 0;
  for (size_t l = 0; l < w_.size(); ++l)
    n += static_cast<int>(w_[l].size() + b_[l].size());
  return n;
}

void DenseNetwork::get_params(Eigen::VectorXd* out, int offset) const {
  for (size_t l = 0; l < w_.size(); ++l) {
    for (int i = 0; i < w_[l].rows(); ++i)
      for (int j = 0; j < w_[l].cols(); ++j) (*out)(offset++) = w_[l](i, j);
    for (int i = 0; i < b_[l].size(); ++i) (*out)(offset++) = b_[l](i);
  }
}

void DenseNetwork::set_params(const Eigen::VectorXd& in, int offset) {
  for (size_t l = 0; l < w_.size(); ++l) {
    for (int i = 0; i < w_[l].rows(); ++i)
      for (int j = 0; j < w_[l].cols(); ++j) w_[l](i, j) = in(offset++);
    for (int i = 0; i < b_[l].size(); ++i) b_[l](i) = in(offset++);
  }
}

void DenseNetwork::flatten_grads(const Grads& grads, Eigen::VectorXd* out,
                                 int offset) {
  for (size_t l = 0; l < grads.dw.size(); ++l) {
    for (int i = 0; i < grads.dw[l].rows(); ++i)
      for (int j = 0; j < grads.dw[l].cols(); ++j)
        (*out)(offset++) = grads.dw[l](i, j);
    for (int i = 0; i < grads.db[l].size(); ++i)
      (*out)(offset++) = grads.db[l](i);
  }
}

AdamOptimizer::AdamOptimizer(int dim, double learning_rate, double beta1,
                             double beta2, double eps)
    : m_(Eigen::VectorXd::Zero(dim)),
      v_(Eigen::VectorXd::Zero(dim)),
      lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {}

void AdamOptimizer::step(Eigen::VectorXd* params, const Eigen::VectorXd& grad) {
  if (params->size() != m_.size() || grad.size() != m_.size())
    throw ShapeMismatch("optimizer dimension mismatch");
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_.array().matrix() +
       (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const Eigen::ArrayXd m_hat = m_.array() / bc1;
  const Eigen::ArrayXd v_hat = v_.array() / bc2;
  *params -= (lr_ * m_hat / (v_hat.sqrt() + eps_)).matrix();
  if (!params->allFinite())
    throw NumericalBlowup("non-finite parameters after optimizer step");
}

void AdamOptimizer::restore(const Eigen::VectorXd& m, const Eigen::VectorXd& v,
                            long t) {
  m_ = m;
  v_ = v;
  t_ = t;
}

Eigen::VectorXd clamped_std(const Eigen::VectorXd& log_std) {
  return log_std.array().min(kLogStdMax).max(kLogStdMin).exp();
}

double gaussian_log_prob(const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std,
                         const Eigen::VectorXd& action) {
  const Eigen::VectorXd std = clamped_std(log_std);
  double lp = -0.5 * mean.size() * std::log(2.0 * M_PI);
  for (int i = 0; i < mean.size(); ++i) {
    const double z = (action(i) - mean(i)) / std(i);
    lp -= 0.5 * z * z + std::log(std(i));
  }
  return lp;
}

Eigen::VectorXd gaussian_sample(const Eigen::VectorXd& mean,
                                const Eigen::VectorXd& log_std,
                                std::mt19937_64& rng) {
  const Eigen::VectorXd std = clamped_std(log_std);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd out(mean.size());
  for (int i = 0; i < mean.size(); ++i) out(i) = mean(i) + std(i) * normal(rng);
  return out;
}

double gaussian_entropy(const Eigen::VectorXd& log_std) {
  const Eigen::VectorXd std = clamped_std(log_std);
  double h = 0.5 * log_std.size() * std::log(2.0 * M_PI * std::exp(1.0));
  for (int i = 0; i < std.size(); ++i) h += std::log(std(i));
  return h;
}

}  // namespace sbrl
