#include "sbrl/nn.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "sbrl/errors.hpp"

using namespace sbrl;

namespace {

// Independent loop-based re-implementation of the forward pass.
Eigen::VectorXd naive_forward(const DenseNetwork& net,
                              const Eigen::VectorXd& input,
                              OutputActivation out_act) {
  std::vector<double> a(input.data(), input.data() + input.size());
  const auto& ws = net.weights();
  const auto& sizes = net.layer_sizes();
  for (size_t l = 0; l < ws.size(); ++l) {
    std::vector<double> z(sizes[l + 1], 0.0);
    for (int i = 0; i < sizes[l + 1]; ++i) {
      double acc = net.biases()[l](i);
      for (int j = 0; j < sizes[l]; ++j) acc += ws[l](i, j) * a[j];
      z[i] = acc;
    }
    const bool relu =
        (l + 1 < ws.size()) || out_act == OutputActivation::kRelu;
    if (relu)
      for (double& v : z) v = std::max(v, 0.0);
    a = std::move(z);
  }
  return Eigen::Map<Eigen::VectorXd>(a.data(), a.size());
}

DenseNetwork random_net(std::vector<int> sizes, uint64_t seed,
                        OutputActivation act = OutputActivation::kIdentity) {
  DenseNetwork net(std::move(sizes), act);
  std::mt19937_64 rng(seed);
  net.init_orthogonal(rng, std::sqrt(2.0), 1.0);
  return net;
}

}  // namespace

TEST_CASE("forward of zero-initialized network is zero") {
  DenseNetwork net({4, 8, 3});
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(4);
  CHECK(net.forward(ones).isZero());
}

TEST_CASE("single identity layer echoes the input") {
  DenseNetwork net({3, 3});
  net.weights()[0] = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::VectorXd x = (Eigen::VectorXd(3) << 1.5, -2.0, 0.25).finished();
  CHECK(net.forward(x).isApprox(x, 1e-15));
}

TEST_CASE("forward matches the independent re-implementation") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto act : {OutputActivation::kIdentity, OutputActivation::kRelu}) {
    const auto net = random_net({5, 11, 7, 3}, 99, act);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd x(5);
      for (int i = 0; i < 5; ++i) x(i) = normal(rng);
      CHECK(net.forward(x).isApprox(naive_forward(net, x, act), 1e-12));
    }
  }
}

TEST_CASE("forward rejects mismatched input width") {
  DenseNetwork net({4, 2});
  const Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(net.forward(bad), ShapeMismatch);
}

TEST_CASE("backward requires a cached forward pass") {
  DenseNetwork net({2, 2});
  DenseNetwork::Cache cache;
  DenseNetwork::Grads grads;
  CHECK_THROWS_AS(net.backward(cache, Eigen::MatrixXd::Zero(1, 2), &grads),
                  StaleCache);
}

TEST_CASE("backward analytic gradient on a linear layer") {
  // Loss (Wx - y)^2 has parameter gradient 2 (Wx - y) x^T.
  DenseNetwork net({3, 1});
  net.weights()[0] << 1.0, -2.0, 0.5;
  const Eigen::VectorXd x = (Eigen::VectorXd(3) << 0.3, 1.0, -0.7).finished();
  const double y = 2.0;
  DenseNetwork::Cache cache;
  const double out = net.forward(Eigen::MatrixXd(x.transpose()), &cache)(0, 0);
  DenseNetwork::Grads grads;
  Eigen::MatrixXd dy(1, 1);
  dy(0, 0) = 2.0 * (out - y);
  net.backward(cache, dy, &grads);
  const Eigen::MatrixXd expected = 2.0 * (out - y) * x.transpose();
  CHECK(grads.dw[0].isApprox(expected, 1e-12));
  CHECK(grads.db[0](0) == doctest::Approx(2.0 * (out - y)));
}

TEST_CASE("gradient of a constant loss is zero") {
  auto net = random_net({4, 6, 2}, 5);
  DenseNetwork::Cache cache;
  net.forward(Eigen::MatrixXd::Random(3, 4), &cache);
  DenseNetwork::Grads grads;
  net.backward(cache, Eigen::MatrixXd::Zero(3, 2), &grads);
  for (const auto& dw : grads.dw) CHECK(dw.isZero());
  for (const auto& db : grads.db) CHECK(db.isZero());
}

TEST_CASE("backward matches central finite differences") {
  auto net = random_net({6, 16, 16, 3}, 12);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(4, 6);
  Eigen::MatrixXd target(4, 3);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (int i = 0; i < target.size(); ++i) target.data()[i] = normal(rng);

  // Scalar loss: 0.5 ||f(x) - target||^2 summed over the batch.
  auto loss_of = [&](DenseNetwork& n) {
    return 0.5 * (n.forward(x) - target).squaredNorm();
  };

  DenseNetwork::Cache cache;
  const Eigen::MatrixXd out = net.forward(x, &cache);
  DenseNetwork::Grads grads;
  net.backward(cache, out - target, &grads);

  Eigen::VectorXd flat(net.num_params()), grad_flat(net.num_params());
  net.get_params(&flat, 0);
  DenseNetwork::flatten_grads(grads, &grad_flat, 0);

  const double h = 1e-5;
  for (int k = 0; k < flat.size(); ++k) {
    Eigen::VectorXd hi = flat, lo = flat;
    hi(k) += h;
    lo(k) -= h;
    net.set_params(hi, 0);
    const double fp = loss_of(net);
    net.set_params(lo, 0);
    const double fm = loss_of(net);
    const double fd = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(grad_flat(k)), 1e-6});
    CHECK(std::abs(fd - grad_flat(k)) / denom < 1e-4);
  }
  net.set_params(flat, 0);
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  AdamOptimizer opt(3, 1e-3);
  Eigen::VectorXd params = (Eigen::VectorXd(3) << 1.0, 2.0, 3.0).finished();
  const Eigen::VectorXd before = params;
  opt.step(&params, Eigen::VectorXd::Zero(3));
  CHECK(params == before);
}

TEST_CASE("adam first step magnitude is the learning rate") {
  AdamOptimizer opt(2, 0.01);
  Eigen::VectorXd params = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd g = (Eigen::VectorXd(2) << 0.5, -4.0).finished();
  opt.step(&params, g);
  // Bias-corrected first step: lr * g / (|g| + eps') ~ lr * sign(g).
  CHECK(params(0) == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(params(1) == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("adam converges on a convex quadratic") {
  // f(p) = 0.5 (p - c)^T D (p - c)
  const Eigen::VectorXd c = (Eigen::VectorXd(4) << 1.0, -2.0, 0.5, 3.0).finished();
  const Eigen::VectorXd d = (Eigen::VectorXd(4) << 1.0, 0.1, 5.0, 2.0).finished();
  AdamOptimizer opt(4, 0.01);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(4);
  for (int i = 0; i < 10000; ++i) {
    const Eigen::VectorXd g = d.cwiseProduct(p - c);
    opt.step(&p, g);
  }
  CHECK((p - c).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("gaussian log prob at the mean and mode property") {
  const Eigen::VectorXd mean = (Eigen::VectorXd(2) << 0.3, -0.7).finished();
  const Eigen::VectorXd log_std = Eigen::VectorXd::Zero(2);
  CHECK(gaussian_log_prob(mean, log_std, mean) ==
        doctest::Approx(-std::log(2.0 * M_PI)).epsilon(1e-12));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double at_mean = gaussian_log_prob(mean, log_std, mean);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd a = mean;
    a(0) += normal(rng);
    a(1) += normal(rng);
    CHECK(gaussian_log_prob(mean, log_std, a) <= at_mean + 1e-12);
  }
}

TEST_CASE("gaussian density integrates to one (1-D quadrature)") {
  const Eigen::VectorXd mean = Eigen::VectorXd::Constant(1, 0.4);
  const Eigen::VectorXd log_std = Eigen::VectorXd::Constant(1, std::log(0.7));
  double integral = 0.0;
  const double lo = -8.0, hi = 8.0;
  const int n = 200000;
  const double dx = (hi - lo) / n;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * dx;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    integral +=
        w * dx *
        std::exp(gaussian_log_prob(mean, log_std,
                                   Eigen::VectorXd::Constant(1, x)));
  }
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("gaussian sampling is seeded and unbiased") {
  const Eigen::VectorXd mean = (Eigen::VectorXd(2) << 1.0, -2.0).finished();
  const Eigen::VectorXd log_std =
      (Eigen::VectorXd(2) << std::log(0.5), std::log(2.0)).finished();

  std::mt19937_64 a(7), b(7);
  CHECK(gaussian_sample(mean, log_std, a) == gaussian_sample(mean, log_std, b));

  std::mt19937_64 rng(11);
  const int n = 100000;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(2);
  for (int i = 0; i < n; ++i) acc += gaussian_sample(mean, log_std, rng);
  acc /= n;
  for (int k = 0; k < 2; ++k) {
    const double se = std::exp(log_std(k)) / std::sqrt(double(n));
    CHECK(std::abs(acc(k) - mean(k)) < 3.0 * se);
  }
}

TEST_CASE("entropy matches the closed form") {
  const Eigen::VectorXd log_std =
      (Eigen::VectorXd(2) << std::log(0.5), std::log(2.0)).finished();
  const double expected =
      std::log(2.0 * M_PI * std::exp(1.0)) + std::log(0.5) + std::log(2.0);
  CHECK(gaussian_entropy(log_std) == doctest::Approx(expected));
}

TEST_CASE("orthogonal init produces orthogonal rows with the right gain") {
  std::mt19937_64 rng(2);
  DenseNetwork net({32, 16});
  net.init_orthogonal(rng, std::sqrt(2.0), 0.7);
  const Eigen::MatrixXd w = net.weights()[0];  // 16x32, output layer gain 0.7
  const Eigen::MatrixXd gram = w * w.transpose();
  CHECK(gram.isApprox(0.49 * Eigen::MatrixXd::Identity(16, 16), 1e-9));
}

TEST_CASE("deterministic initialization given the seed") {
  auto a = random_net({8, 8, 2}, 123);
  auto b = random_net({8, 8, 2}, 123);
  Eigen::VectorXd pa(a.num_params()), pb(b.num_params());
  a.get_params(&pa, 0);
  b.get_params(&pb, 0);
  CHECK(pa == pb);
}
