#include "sbrl/geometry.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "sbrl/errors.hpp"

using namespace sbrl;

namespace {

// Dense-sampling brute-force oracle: closest curve sample at `res` spacing.
double oracle_min_distance(const ArcLengthCurve& curve, const Vec2& point,
                           double res) {
  double best = std::numeric_limits<double>::infinity();
  const double end = curve.closed() ? curve.total_length()
                                    : curve.total_length() + res / 2;
  for (double s = 0.0; s < end; s += res)
    best = std::min(best, (curve.position_at(s) - point).norm());
  return best;
}

std::vector<Vec2> random_polyline(std::mt19937_64& rng, int n, double step) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec2> pts{{0.0, 0.0}};
  double heading = u(rng) * M_PI;
  for (int i = 1; i < n; ++i) {
    heading += 0.6 * u(rng);
    pts.push_back(pts.back() +
                  step * Vec2(std::cos(heading), std::sin(heading)));
  }
  return pts;
}

}  // namespace

TEST_CASE("build_curve cumulative lengths") {
  const auto c = build_curve({{0, 0}, {3, 0}, {3, 4}}, false);
  CHECK(c.cum_s() == std::vector<double>{0.0, 3.0, 7.0});
  CHECK(c.total_length() == doctest::Approx(7.0));
  CHECK_FALSE(c.closed());
}

TEST_CASE("build_curve closed perimeter") {
  const auto c = build_curve({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, true);
  CHECK(c.total_length() == doctest::Approx(4.0));
}

TEST_CASE("build_curve random points match pairwise-distance oracle") {
  std::mt19937_64 rng(7);
  const auto pts = random_polyline(rng, 1000, 0.5);
  const auto c = build_curve(pts, false);
  double oracle = 0.0;
  for (size_t i = 1; i < pts.size(); ++i) oracle += (pts[i] - pts[i - 1]).norm();
  CHECK(c.total_length() == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("build_curve rejects degenerate input") {
  CHECK_THROWS_AS(build_curve({{0, 0}}, false), DegenerateCurve);
  CHECK_THROWS_AS(build_curve({{0, 0}, {0, 0}, {1, 0}}, false),
                  DegenerateCurve);
}

TEST_CASE("project on-curve point") {
  const auto c = build_curve({{0, 0}, {10, 0}, {10, 10}}, false);
  const auto p = c.project({10, 3});
  CHECK(p.lateral == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.s == doctest::Approx(13.0));
  CHECK(p.foot.isApprox(Vec2(10, 3), 1e-12));
}

TEST_CASE("project straight curve with lateral sign") {
  const auto c = build_curve({{0, 0}, {10, 0}}, false);
  const auto p = c.project({3, 2});
  CHECK(p.s == doctest::Approx(3.0));
  CHECK(p.lateral == doctest::Approx(2.0));
  CHECK(p.foot.isApprox(Vec2(3, 0), 1e-12));
  const auto q = c.project({3, -2});
  CHECK(q.lateral == doctest::Approx(-2.0));
}

TEST_CASE("project closed square corner tie resolves to smallest s") {
  const auto c = build_curve({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, true);
  const auto p = c.project({-0.1, -0.1});
  CHECK(p.foot.isApprox(Vec2(0, 0), 1e-12));
  CHECK(p.s == doctest::Approx(0.0));
}

TEST_CASE("projection optimality vs dense-sampling oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = build_curve(random_polyline(rng, 12, 0.3),
                               trial % 3 == 0);
    const Vec2 q(u(rng), u(rng));
    const auto p = c.project(q);
    const double oracle = oracle_min_distance(c, q, 1e-4);
    CHECK(std::abs(p.lateral) <= oracle + 1e-6);
    // project() must agree with the exhaustive scan.
    const auto pb = c.project_brute(q);
    CHECK(std::abs(p.lateral) == doctest::Approx(std::abs(pb.lateral)));
    CHECK(p.s == doctest::Approx(pb.s).epsilon(1e-9));
  }
}

TEST_CASE("progress on open curve") {
  const auto c = build_curve({{0, 0}, {10, 0}}, false);
  CHECK(c.progress(2, 5) == doctest::Approx(3.0));
  CHECK(c.progress(5, 5) == 0.0);
  CHECK_THROWS_AS(c.progress(-1, 5), OutOfRange);
}

TEST_CASE("progress wraps on closed curve") {
  std::vector<Vec2> pts;
  for (int i = 0; i < 100; ++i) pts.emplace_back(i % 50, i / 50 == 0 ? 0 : 1);
  // Rectangle of perimeter 100: 50 along, 1 up, 49 back... build explicitly.
  pts.clear();
  for (int i = 0; i < 50; ++i) pts.emplace_back(i, 0.0);
  pts.emplace_back(49.5, 0.5);
  for (int i = 49; i >= 0; --i) pts.emplace_back(i, 1.0);
  const auto c = build_curve(pts, true);
  const double l = c.total_length();
  CHECK(c.progress(l - 1.0, 1.0) == doctest::Approx(2.0));
  CHECK(c.progress(1.0, l - 1.0) == doctest::Approx(-2.0));
}

TEST_CASE("progress additivity and wrap consistency") {
  const auto open_c = build_curve({{0, 0}, {30, 0}}, false);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 30.0);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng);
    CHECK(open_c.progress(a, b) + open_c.progress(b, c) ==
          doctest::Approx(open_c.progress(a, c)).epsilon(1e-12));
  }
  const auto sq = build_curve({{0, 0}, {10, 0}, {10, 10}, {0, 10}}, true);
  const double l = sq.total_length();
  std::uniform_real_distribution<double> us(0.0, l - 1e-9);
  std::uniform_real_distribution<double> ud(-l / 2 + 1e-6, l / 2 - 1e-6);
  for (int i = 0; i < 200; ++i) {
    const double s = us(rng), d = ud(rng);
    const double target = std::fmod(s + d + l, l);
    CHECK(sq.progress(s, target) == doctest::Approx(d).epsilon(1e-9));
  }
}

TEST_CASE("to_local identity and rotation") {
  const Pose origin{{0, 0}, 0.0};
  CHECK(to_local(origin, Vec2(3, 4)).isApprox(Vec2(3, 4), 1e-15));
  const Pose pose{{1, 1}, M_PI / 2};
  CHECK(to_local(pose, Vec2(1, 2)).isApprox(Vec2(1, 0), 1e-12));
}

TEST_CASE("to_local round trip and rigidity") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  const Pose pose{{u(rng), u(rng)}, u(rng) / 20.0};
  for (int i = 0; i < 50; ++i) {
    const Vec2 a(u(rng), u(rng)), b(u(rng), u(rng));
    const Vec2 la = to_local(pose, a), lb = to_local(pose, b);
    CHECK(from_local(pose, la).isApprox(a, 1e-12));
    CHECK(std::abs((la - lb).norm() - (a - b).norm()) < 1e-12);
  }
}

namespace {

Track straight_track(double half_width) {
  Track t;
  std::vector<Vec2> pts;
  for (int i = 0; i <= 400; ++i) pts.emplace_back(i * 1.0, 0.0);
  t.centerline = build_curve(pts, false);
  t.half_width_left.assign(pts.size(), half_width);
  t.half_width_right.assign(pts.size(), half_width);
  return t;
}

}  // namespace

TEST_CASE("boundary observation on straight track") {
  const Track t = straight_track(5.0);
  const Pose pose{{0, 0}, 0.0};
  const auto obs = boundary_observation(t, pose);
  REQUIRE(obs.size() == 28);
  int k = 0;
  for (double d : kBoundaryDistances) {
    CHECK(obs[k++] == doctest::Approx(d));      // left x
    CHECK(obs[k++] == doctest::Approx(5.0));    // left y
    CHECK(obs[k++] == doctest::Approx(d));      // right x
    CHECK(obs[k++] == doctest::Approx(-5.0));   // right y
  }
}

TEST_CASE("boundary observation with lateral displacement") {
  const Track t = straight_track(5.0);
  const Pose pose{{0, 1.0}, 0.0};  // 1 m left of centerline
  const auto obs = boundary_observation(t, pose);
  for (int i = 0; i < 7; ++i) {
    CHECK(obs[4 * i + 1] == doctest::Approx(4.0));
    CHECK(obs[4 * i + 3] == doctest::Approx(-6.0));
  }
}

TEST_CASE("waypoint observation constant speed straight reference") {
  ReferenceTrajectory ref;
  std::vector<Vec2> pts;
  for (int i = 0; i <= 300; ++i) pts.emplace_back(i * 1.0, 0.0);
  ref.curve = build_curve(pts, false);
  ref.speed.assign(pts.size(), 20.0);
  const Pose pose{{0, 0}, 0.0};
  const auto obs = waypoint_observation(ref, pose);
  REQUIRE(obs.size() == 40);
  for (int k = 0; k < 20; ++k) {
    CHECK(obs[2 * k] == doctest::Approx(5.0 * (k + 1)).epsilon(1e-6));
    CHECK(obs[2 * k + 1] == doctest::Approx(0.0));
  }
}

TEST_CASE("track and reference file round trip") {
  Track t = straight_track(4.0);
  save_track(t, "/tmp/sbrl_test_track.txt");
  const Track t2 = load_track("/tmp/sbrl_test_track.txt");
  CHECK(t2.centerline.total_length() ==
        doctest::Approx(t.centerline.total_length()).epsilon(1e-15));
  CHECK(t2.half_width_left == t.half_width_left);

  ReferenceTrajectory ref;
  ref.curve = t.centerline;
  ref.speed.assign(t.centerline.points().size(), 25.0);
  save_reference(ref, "/tmp/sbrl_test_ref.txt");
  const auto r2 = load_reference("/tmp/sbrl_test_ref.txt");
  CHECK(r2.speed == ref.speed);
  CHECK(r2.curve.points().size() == ref.curve.points().size());
}
