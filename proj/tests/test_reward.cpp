#include "sbrl/reward.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "sbrl/errors.hpp"

using namespace sbrl;

namespace {

ArcLengthCurve straight_curve(double length = 1000.0) {
  std::vector<Vec2> pts;
  for (double x = 0.0; x <= length; x += 5.0) pts.emplace_back(x, 0.0);
  return build_curve(pts, false);
}

ArcLengthCurve square_curve() {
  // Closed unit-scaled square of perimeter 40.
  return build_curve({{0, 0}, {10, 0}, {10, 10}, {0, 10}}, true);
}

BezierPrediction point_prediction(const Eigen::Vector2d& final_local, int h,
                                  double var = 0.0) {
  // Straight-line marginals toward the final point with constant variance.
  BezierPrediction pred;
  for (int i = 1; i <= h; ++i) {
    const double t = static_cast<double>(i) / h;
    pred.means.push_back(t * final_local);
    pred.vars.emplace_back(var, var);
  }
  return pred;
}

}  // namespace

TEST_CASE("progress reward is the signed arc difference") {
  const ArcLengthCurve tau = straight_curve();
  CHECK(progress_reward({10, 2}, {13.5, -1}, tau) == doctest::Approx(3.5));
  CHECK(progress_reward({13.5, 0}, {10, 0}, tau) == doctest::Approx(-3.5));
  CHECK(progress_reward({20, 1}, {20, -4}, tau) == doctest::Approx(0.0));
}

TEST_CASE("progress reward wraps on closed curves") {
  const ArcLengthCurve tau = square_curve();
  // Crossing the seam forward: s 39 -> 1 is +2, not -38.
  const Vec2 before = tau.position_at(39.0);
  const Vec2 after = tau.position_at(1.0);
  CHECK(progress_reward(before, after, tau) == doctest::Approx(2.0));
  CHECK(progress_reward(after, before, tau) == doctest::Approx(-2.0));
}

TEST_CASE("progress reward telescopes along a path") {
  const ArcLengthCurve tau = straight_curve();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(5.0, 900.0);
  std::uniform_real_distribution<double> uy(-4.0, 4.0);
  std::vector<Vec2> path;
  for (int i = 0; i < 30; ++i) path.emplace_back(ux(rng), uy(rng));
  double summed = 0.0;
  for (size_t i = 0; i + 1 < path.size(); ++i)
    summed += progress_reward(path[i], path[i + 1], tau);
  CHECK(summed ==
        doctest::Approx(progress_reward(path.front(), path.back(), tau))
            .epsilon(1e-9));
}

TEST_CASE("style reward values") {
  const ArcLengthCurve tau = straight_curve();
  CHECK(style_reward({50, 0}, tau, 0.01) == doctest::Approx(1.0));
  CHECK(style_reward({50, 10}, tau, 0.01) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(style_reward({50, 10}, tau, 0.01) ==
        doctest::Approx(0.36787944117144233).epsilon(1e-12));
  CHECK(style_reward({50, -10}, tau, 0.01) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  // Monotone decreasing in distance.
  double prev = 1.1;
  for (double d = 0.0; d <= 40.0; d += 2.5) {
    const double r = style_reward({50, d}, tau, 0.01);
    CHECK(r < prev);
    CHECK(r > 0.0);
    CHECK(r <= 1.0);
    prev = r;
  }
}

TEST_CASE("horizon style bound is the geometric series") {
  RewardConfig cfg;
  cfg.alpha_psi = 0.8;
  // sum_{i=1..H} 0.8^i = 0.8 (1 - 0.8^H) / 0.2.
  CHECK(cfg.horizon_style_bound(100) ==
        doctest::Approx(0.8 * (1.0 - std::pow(0.8, 100)) / 0.2).epsilon(1e-12));
  CHECK(cfg.horizon_style_bound(100) == doctest::Approx(4.0).epsilon(1e-9));
  cfg.alpha_psi = 0.5;
  CHECK(cfg.horizon_style_bound(2) == doctest::Approx(0.75));
}

TEST_CASE("penalty lookup") {
  RewardConfig cfg;
  CHECK(cfg.penalty_for(Termination::kNone) == 0.0);
  CHECK(cfg.penalty_for(Termination::kOffTrack) == -5.0);
  CHECK(cfg.penalty_for(Termination::kSpin) == -5.0);
  CHECK(cfg.penalty_for(Termination::kSlow) == -2.0);
}

TEST_CASE("horizon progress reward, deterministic prediction") {
  const ArcLengthCurve tau = straight_curve();
  RewardConfig cfg;
  std::mt19937_64 rng(3);

  SUBCASE("aligned pose on the curve") {
    const Pose pose{{10.0, 0.0}, 0.0};
    const auto pred = point_prediction({25.0, 0.0}, 20);
    CHECK(horizon_progress_reward(pred, pose, tau, cfg, rng) ==
          doctest::Approx(25.0).epsilon(1e-9));
  }
  SUBCASE("rotated pose maps the local prediction into the world") {
    // Heading pi/2: local +x points along world +y, local -y along world +x.
    const Pose pose{{40.0, 0.0}, M_PI / 2.0};
    const auto pred = point_prediction({0.0, -12.0}, 20);
    CHECK(horizon_progress_reward(pred, pose, tau, cfg, rng) ==
          doctest::Approx(12.0).epsilon(1e-9));
  }
  SUBCASE("offset start position telescopes from the projection") {
    const Pose pose{{10.0, 3.0}, 0.0};
    const auto pred = point_prediction({7.0, 1.0}, 20);
    // Final world point (17, 4): progress from s=10 to s=17.
    CHECK(horizon_progress_reward(pred, pose, tau, cfg, rng) ==
          doctest::Approx(7.0).epsilon(1e-9));
  }
}

TEST_CASE("horizon progress reward is unbiased on a straight line") {
  // On a straight reference the progress of a sample is linear in the sample,
  // so the Monte Carlo mean must match the mean displacement exactly in
  // expectation; check a 3-sigma interval over many seeds.
  const ArcLengthCurve tau = straight_curve();
  RewardConfig cfg;
  cfg.n_mc = 4;
  const Pose pose{{100.0, 0.0}, 0.0};
  const double var = 9.0;
  const auto pred = point_prediction({30.0, 0.0}, 10, var);

  const int trials = 4000;
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < trials; ++i) {
    std::mt19937_64 rng(1000 + i);
    const double r = horizon_progress_reward(pred, pose, tau, cfg, rng);
    acc += r;
    acc2 += r * r;
  }
  const double mean = acc / trials;
  const double se =
      std::sqrt((acc2 / trials - mean * mean) / (trials - 1.0));
  CHECK(std::abs(mean - 30.0) < 3.0 * se + 1e-9);
  CHECK(se < 1.0);
}

TEST_CASE("horizon progress reward is deterministic given the rng state") {
  const ArcLengthCurve tau = straight_curve();
  RewardConfig cfg;
  const Pose pose{{50.0, 1.0}, 0.05};
  const auto pred = point_prediction({20.0, -2.0}, 10, 4.0);
  std::mt19937_64 a(9), b(9);
  CHECK(horizon_progress_reward(pred, pose, tau, cfg, a) ==
        horizon_progress_reward(pred, pose, tau, cfg, b));
}

TEST_CASE("horizon style reward, deterministic prediction") {
  const ArcLengthCurve tau = straight_curve();
  RewardConfig cfg;
  std::mt19937_64 rng(7);

  SUBCASE("on-curve marginals give the full geometric sum") {
    const Pose pose{{10.0, 0.0}, 0.0};
    const auto pred = point_prediction({25.0, 0.0}, 40);
    CHECK(horizon_style_reward(pred, pose, tau, cfg, rng) ==
          doctest::Approx(cfg.horizon_style_bound(40)).epsilon(1e-9));
  }
  SUBCASE("constant lateral offset scales the sum by exp(-a d^2)") {
    // Pose offset 10 m left, prediction straight ahead in local frame:
    // every marginal sits 10 m from the curve.
    const Pose pose{{10.0, 10.0}, 0.0};
    const auto pred = point_prediction({25.0, 0.0}, 40);
    CHECK(horizon_style_reward(pred, pose, tau, cfg, rng) ==
          doctest::Approx(std::exp(-1.0) * cfg.horizon_style_bound(40))
              .epsilon(1e-9));
  }
  SUBCASE("bounded above by the geometric series") {
    std::mt19937_64 noise(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      const Pose pose{{200.0 + 10.0 * normal(noise), 3.0 * normal(noise)},
                      0.3 * normal(noise)};
      auto pred = point_prediction({30.0, 5.0 * normal(noise)}, 25,
                                   std::abs(normal(noise)) * 4.0);
      const double r = horizon_style_reward(pred, pose, tau, cfg, rng);
      CHECK(r >= 0.0);
      CHECK(r <= cfg.horizon_style_bound(25) + 1e-9);
    }
  }
}

TEST_CASE("combine is affine in alpha_s") {
  RewardBreakdown b;
  b.r_p = 1.2;
  b.r_s = 0.9;
  b.r_p_psi = 0.4;
  b.r_s_psi = 2.5;
  b.penalty = -5.0;
  CHECK(combine(b, 0.0) == doctest::Approx(1.2 + 0.4 - 5.0));
  CHECK(combine(b, 1.0) == doctest::Approx(1.2 + 0.4 + 0.9 + 2.5 - 5.0));
  CHECK(combine(b, 0.5) ==
        doctest::Approx(1.2 + 0.4 + 0.5 * (0.9 + 2.5) - 5.0));
  // Affinity: f(a) - f(0) is linear in a.
  const double f0 = combine(b, 0.0);
  CHECK(combine(b, 2.0) - f0 == doctest::Approx(2.0 * (combine(b, 1.0) - f0)));
}
