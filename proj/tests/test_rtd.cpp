#include "sbrl/rtd.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "sbrl/errors.hpp"

using namespace sbrl;

namespace {

// Circular track, radius r, dense sampling.
Track circle_track(double radius, double half_width, int n = 600) {
  Track t;
  std::vector<Vec2> pts;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    pts.emplace_back(radius * std::cos(a), radius * std::sin(a));
  }
  t.centerline = build_curve(pts, true);
  t.half_width_left.assign(n, half_width);
  t.half_width_right.assign(n, half_width);
  return t;
}

ReferenceTrajectory offset_demo(const Track& track,
                                const std::function<double(double)>& lateral,
                                const std::function<double(double)>& speed) {
  const ArcLengthCurve& cl = track.centerline;
  const double lap = cl.total_length();
  ReferenceTrajectory demo;
  std::vector<Vec2> pts;
  for (size_t i = 0; i < cl.points().size(); ++i) {
    const double s = cl.cum_s()[i];
    const double phase = s / lap;
    pts.push_back(cl.points()[i] + lateral(phase) * cl.normal_at(s));
    demo.speed.push_back(speed(phase));
  }
  demo.curve = build_curve(pts, true);
  return demo;
}

}  // namespace

TEST_CASE("fit_weights reconstructs centerline at constant speed") {
  const Track track = circle_track(50.0, 6.0);
  const auto demo = offset_demo(
      track, [](double) { return 0.0; }, [](double) { return 22.0; });
  const RBFBasis basis = RBFBasis::make(20, true);
  const WeightFit fit = fit_weights(demo, track, basis);
  CHECK(fit.rms_lateral < 1e-6);
  CHECK(fit.rms_speed < 1e-6);
  // Reconstruction stays near zero lateral / constant speed.
  for (double phase = 0.0; phase < 1.0; phase += 0.01) {
    CHECK(std::abs(reconstruct_lateral(basis, fit.weights.w_lateral, phase)) <
          1e-5);
    CHECK(reconstruct_speed(basis, fit.weights.w_speed, phase) ==
          doctest::Approx(22.0).epsilon(1e-5));
  }
}

TEST_CASE("fit_weights sinusoidal lateral matches dense oracle") {
  const Track track = circle_track(60.0, 6.0, 1000);
  const auto lat = [](double phase) { return 2.0 * std::sin(2.0 * M_PI * phase); };
  const auto demo =
      offset_demo(track, lat, [](double) { return 20.0; });
  RBFBasis basis = RBFBasis::make(20, true);
  basis.bandwidth = 0.05;
  const WeightFit fit = fit_weights(demo, track, basis);
  // Dense least-squares oracle on 1000 phase samples of the true function.
  double rms = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double phase = i / 1000.0;
    const double err =
        reconstruct_lateral(basis, fit.weights.w_lateral, phase) - lat(phase);
    rms += err * err;
  }
  rms = std::sqrt(rms / 1000.0);
  CHECK(rms < 0.05);
}

TEST_CASE("fit_weights duplicate centers without ridge is ill conditioned") {
  const Track track = circle_track(50.0, 6.0, 200);
  const auto demo = offset_demo(
      track, [](double) { return 0.5; }, [](double) { return 20.0; });
  RBFBasis basis = RBFBasis::make(4, true, /*ridge=*/0.0);
  basis.custom_centers = {0.1, 0.1, 0.5, 0.9};  // duplicated center
  CHECK_THROWS_AS(fit_weights(demo, track, basis), IllConditioned);
}

TEST_CASE("fit_rtd degenerate and hand-computed cases") {
  TrajectoryWeights w;
  w.w_lateral = Eigen::VectorXd::Constant(1, 3.0);
  w.w_speed = Eigen::VectorXd::Constant(1, 7.0);
  const RBFBasis basis = RBFBasis::make(2, true);

  SUBCASE("identical vectors give jitter-only covariance") {
    const auto model = fit_rtd({w, w}, basis, "t", 1e-8);
    CHECK(model.mu_w(0) == doctest::Approx(3.0));
    CHECK(model.mu_w(1) == doctest::Approx(7.0));
    CHECK(model.sigma_w.isApprox(1e-8 * Eigen::MatrixXd::Identity(2, 2),
                                 1e-9));
  }

  SUBCASE("1-D pair gives mean 1 and variance 2 plus jitter") {
    TrajectoryWeights a = w, b = w;
    a.w_lateral(0) = 0.0;
    b.w_lateral(0) = 2.0;
    a.w_speed(0) = 0.0;
    b.w_speed(0) = 2.0;
    const auto model = fit_rtd({a, b}, basis, "t", 1e-8);
    CHECK(model.mu_w(0) == doctest::Approx(1.0));
    // Unbiased: ((0-1)^2 + (2-1)^2)/(2-1) = 2, plus jitter = 1e-8*tr/dim.
    const double jitter = 1e-8 * 4.0 / 2.0;
    CHECK(model.sigma_w(0, 0) == doctest::Approx(2.0 + jitter));
  }

  SUBCASE("fewer than two demos is rejected") {
    CHECK_THROWS_AS(fit_rtd({w}, basis, "t"), InsufficientData);
  }
}

TEST_CASE("fit_rtd recovers a known Gaussian from 50 samples") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int dim = 4;  // 2 lateral + 2 speed
  Eigen::VectorXd mu(dim);
  mu << 1.0, -2.0, 10.0, 20.0;
  const Eigen::VectorXd sigma_diag =
      (Eigen::VectorXd(dim) << 0.5, 1.0, 2.0, 0.25).finished();
  std::vector<TrajectoryWeights> ws;
  for (int i = 0; i < 50; ++i) {
    TrajectoryWeights w;
    w.w_lateral.resize(2);
    w.w_speed.resize(2);
    for (int k = 0; k < 4; ++k) {
      const double x = mu(k) + std::sqrt(sigma_diag(k)) * normal(rng);
      if (k < 2) w.w_lateral(k) = x;
      else w.w_speed(k - 2) = x;
    }
    ws.push_back(w);
  }
  const auto model = fit_rtd(ws, RBFBasis::make(2, true), "t");
  for (int k = 0; k < 4; ++k) {
    const double tol = 3.0 * std::sqrt(sigma_diag(k)) / std::sqrt(50.0);
    CHECK(std::abs(model.mu_w(k) - mu(k)) < tol);
  }
}

TEST_CASE("reconstruction is linear in the weights") {
  const RBFBasis basis = RBFBasis::make(10, true);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd w1(10), w2(10);
  for (int i = 0; i < 10; ++i) {
    w1(i) = normal(rng);
    w2(i) = normal(rng);
  }
  for (double phase = 0.0; phase < 1.0; phase += 0.037) {
    const double lhs =
        reconstruct_lateral(basis, 2.0 * w1 + 0.5 * w2, phase);
    const double rhs = 2.0 * reconstruct_lateral(basis, w1, phase) +
                       0.5 * reconstruct_lateral(basis, w2, phase);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("sampled references are deterministic, feasible, and unbiased") {
  const Track track = circle_track(50.0, 5.0, 400);
  std::vector<TrajectoryWeights> ws;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const RBFBasis basis = RBFBasis::make(8, true);
  for (int i = 0; i < 10; ++i) {
    TrajectoryWeights w;
    w.w_lateral = 0.5 * Eigen::VectorXd::NullaryExpr(
                            8, [&](int) { return normal(rng); });
    w.w_speed = Eigen::VectorXd::Constant(8, 20.0) +
                Eigen::VectorXd::NullaryExpr(8, [&](int) { return normal(rng); });
    ws.push_back(w);
  }
  auto model = fit_rtd(ws, basis, "circle");
  model.v_floor = 3.0;
  model.v_cap = 40.0;

  SUBCASE("covariance is symmetric and admits Cholesky") {
    CHECK((model.sigma_w - model.sigma_w.transpose()).cwiseAbs().maxCoeff() <
          1e-12);
    Eigen::LLT<Eigen::MatrixXd> llt(model.sigma_w);
    CHECK(llt.info() == Eigen::Success);
  }

  SUBCASE("same seed reproduces the trajectory bitwise") {
    const auto a = sample_reference(model, track, 123);
    const auto b = sample_reference(model, track, 123);
    REQUIRE(a.curve.points().size() == b.curve.points().size());
    for (size_t i = 0; i < a.curve.points().size(); ++i) {
      CHECK(a.curve.points()[i] == b.curve.points()[i]);
      CHECK(a.speed[i] == b.speed[i]);
    }
  }

  SUBCASE("samples stay within bounds and above the speed floor") {
    for (uint64_t seed = 0; seed < 30; ++seed) {
      const auto ref = sample_reference(model, track, seed);
      for (size_t i = 0; i < ref.curve.points().size(); ++i) {
        const Projection p =
            track.centerline.project(ref.curve.points()[i]);
        CHECK(std::abs(p.lateral) <= 0.9 * 5.0 + 1e-9);
        CHECK(ref.speed[i] >= 3.0);
        CHECK(ref.speed[i] <= 40.0);
      }
    }
  }

  SUBCASE("per-phase sample mean matches the mu_w reconstruction") {
    // Widen the margin so clamping does not bias the estimate.
    model.lateral_margin = 10.0;
    const auto mean_ref = reconstruct_reference(model, track, model.mu_w);
    const int n_samples = 1000;
    const size_t n_pts = mean_ref.curve.points().size();
    std::vector<double> acc(n_pts, 0.0), acc2(n_pts, 0.0);
    for (int k = 0; k < n_samples; ++k) {
      const auto ref = sample_reference(model, track, 1000 + k);
      for (size_t i = 0; i < n_pts; ++i) {
        const double lat =
            track.centerline.project(ref.curve.points()[i]).lateral;
        acc[i] += lat;
        acc2[i] += lat * lat;
      }
    }
    int failures = 0;
    for (size_t i = 0; i < n_pts; i += 10) {
      const double mean = acc[i] / n_samples;
      const double var =
          std::max(acc2[i] / n_samples - mean * mean, 1e-12);
      const double se = std::sqrt(var / n_samples);
      const double expected =
          track.centerline.project(mean_ref.curve.points()[i]).lateral;
      if (std::abs(mean - expected) > 3.0 * se + 1e-9) ++failures;
    }
    // 3-sigma test over ~40 phases; allow a couple of statistical misses.
    CHECK(failures <= 3);
  }
}

TEST_CASE("sigma close to zero reproduces the mean trajectory") {
  const Track track = circle_track(40.0, 5.0, 300);
  TrajectoryWeights w;
  w.w_lateral = Eigen::VectorXd::Constant(6, 1.0);
  w.w_speed = Eigen::VectorXd::Constant(6, 15.0);
  auto model = fit_rtd({w, w}, RBFBasis::make(6, true), "c", 1e-16);
  const auto sampled = sample_reference(model, track, 5);
  const auto mean_ref = reconstruct_reference(model, track, model.mu_w);
  for (size_t i = 0; i < sampled.curve.points().size(); ++i) {
    CHECK((sampled.curve.points()[i] - mean_ref.curve.points()[i]).norm() <
          1e-5);
  }
}

TEST_CASE("rtd model file round trip") {
  TrajectoryWeights a, b;
  a.w_lateral = Eigen::VectorXd::Constant(3, 1.0);
  a.w_speed = Eigen::VectorXd::Constant(3, 10.0);
  b = a;
  b.w_lateral(1) = 2.0;
  const auto model = fit_rtd({a, b}, RBFBasis::make(3, true), "oval");
  save_rtd(model, "/tmp/sbrl_test_rtd.txt");
  const auto loaded = load_rtd("/tmp/sbrl_test_rtd.txt");
  CHECK(loaded.track_binding == "oval");
  CHECK(loaded.basis.n_basis == 3);
  CHECK(loaded.mu_w.isApprox(model.mu_w, 1e-15));
  CHECK(loaded.sigma_w.isApprox(model.sigma_w, 1e-15));
}
