#include "sbrl/expert.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sbrl/errors.hpp"

namespace sbrl {

namespace {

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

// Discrete curvature of a closed polygonal chain: turn angle per arc length.
std::vector<double> polygon_curvature(const std::vector<Vec2>& pts) {
  const int n = static_cast<int>(pts.size());
  std::vector<double> curv(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const Vec2& prev = pts[(i + n - 1) % n];
    const Vec2& cur = pts[i];
    const Vec2& next = pts[(i + 1) % n];
    const Vec2 d0 = cur - prev;
    const Vec2 d1 = next - cur;
    const double l0 = d0.norm(), l1 = d1.norm();
    if (l0 < 1e-12 || l1 < 1e-12) continue;
    const double turn =
        wrap_angle(std::atan2(d1.y(), d1.x()) - std::atan2(d0.y(), d0.x()));
    curv[i] = turn / (0.5 * (l0 + l1));
  }
  return curv;
}

std::vector<double> circular_smooth(const std::vector<double>& x, int window) {
  const int n = static_cast<int>(x.size());
  if (window <= 1 || n == 0) return x;
  std::vector<double> out(n, 0.0);
  const int half = window / 2;
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int k = -half; k <= half; ++k) acc += x[((i + k) % n + n) % n];
    out[i] = acc / (2 * half + 1);
  }
  return out;
}

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c,
                        const Vec2& d) {
  auto cross = [](const Vec2& u, const Vec2& v) {
    return u.x() * v.y() - u.y() * v.x();
  };
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

// Smooth periodic noise over the lap phase in [0,1).
struct PhaseNoise {
  std::vector<double> cos_c, sin_c;

  static PhaseNoise draw(std::mt19937_64& rng, int harmonics,
                         double amplitude) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    PhaseNoise n;
    for (int k = 1; k <= harmonics; ++k) {
      n.cos_c.push_back(amplitude / k * u(rng));
      n.sin_c.push_back(amplitude / k * u(rng));
    }
    return n;
  }

  double at(double phase) const {
    double acc = 0.0;
    for (size_t k = 0; k < cos_c.size(); ++k) {
      const double w = 2.0 * M_PI * (k + 1) * phase;
      acc += cos_c[k] * std::cos(w) + sin_c[k] * std::sin(w);
    }
    return acc;
  }
};

}  // namespace

Track make_oval_track(double straight_length, double corner_radius,
                      double half_width, double spacing) {
  if (straight_length <= 0.0 || corner_radius <= half_width)
    throw InvalidGeometry("degenerate oval dimensions");
  std::vector<Vec2> pts;
  const double r = corner_radius;
  // Bottom straight, left to right.
  const int n_straight = std::max(2, static_cast<int>(straight_length / spacing));
  for (int i = 0; i < n_straight; ++i)
    pts.emplace_back(straight_length * i / n_straight, 0.0);
  // Right half circle, center (S, r).
  const int n_arc = std::max(4, static_cast<int>(M_PI * r / spacing));
  for (int i = 0; i < n_arc; ++i) {
    const double a = -M_PI / 2.0 + M_PI * i / n_arc;
    pts.emplace_back(straight_length + r * std::cos(a), r + r * std::sin(a));
  }
  // Top straight, right to left.
  for (int i = 0; i < n_straight; ++i)
    pts.emplace_back(straight_length * (n_straight - i) / n_straight, 2.0 * r);
  // Left half circle, center (0, r).
  for (int i = 0; i < n_arc; ++i) {
    const double a = M_PI / 2.0 + M_PI * i / n_arc;
    pts.emplace_back(r * std::cos(a), r + r * std::sin(a));
  }
  Track t;
  t.centerline = build_curve(pts, true);
  t.half_width_left.assign(pts.size(), half_width);
  t.half_width_right.assign(pts.size(), half_width);
  validate_track(t);
  return t;
}

Track make_random_circuit(uint64_t seed, double mean_radius,
                          double half_width, int n_points, double roughness) {
  if (n_points < 16) throw InvalidGeometry("too few circuit points");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int harmonics = 6;
  std::vector<double> a(harmonics), b(harmonics);
  for (int k = 0; k < harmonics; ++k) {
    a[k] = roughness / (k + 2.0) * u(rng);
    b[k] = roughness / (k + 2.0) * u(rng);
  }
  std::vector<Vec2> pts;
  for (int i = 0; i < n_points; ++i) {
    const double th = 2.0 * M_PI * i / n_points;
    double r = 1.0;
    for (int k = 0; k < harmonics; ++k)
      r += a[k] * std::cos((k + 2) * th) + b[k] * std::sin((k + 2) * th);
    r *= mean_radius;
    pts.emplace_back(r * std::cos(th), r * std::sin(th));
  }
  Track t;
  t.centerline = build_curve(pts, true);
  t.half_width_left.assign(pts.size(), half_width);
  t.half_width_right.assign(pts.size(), half_width);
  validate_track(t);
  return t;
}

void validate_track(const Track& track) {
  const auto& pts = track.centerline.points();
  const int n = static_cast<int>(pts.size());
  if (n < 8) throw InvalidGeometry("track needs at least 8 points");
  if (!track.centerline.closed())
    throw InvalidGeometry("tracks must be closed circuits");
  if (track.half_width_left.size() != pts.size() ||
      track.half_width_right.size() != pts.size())
    throw InvalidGeometry("half-width arrays must match the centerline");
  double max_width = 0.0;
  for (int i = 0; i < n; ++i) {
    if (track.half_width_left[i] <= 0.0 || track.half_width_right[i] <= 0.0)
      throw InvalidGeometry("half widths must be positive");
    max_width = std::max({max_width, track.half_width_left[i],
                          track.half_width_right[i]});
  }
  // Boundary pinch: the inside boundary degenerates when the turn radius
  // drops to the half width.
  const std::vector<double> curv = polygon_curvature(pts);
  for (int i = 0; i < n; ++i) {
    if (std::abs(curv[i]) > 1e-12 &&
        1.0 / std::abs(curv[i]) < 1.2 * max_width)
      throw InvalidGeometry("turn radius too small for the track width");
  }
  // Centerline self-intersection (non-adjacent segments).
  for (int i = 0; i < n; ++i) {
    const Vec2& a0 = pts[i];
    const Vec2& a1 = pts[(i + 1) % n];
    for (int j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent across the seam
      const Vec2& b0 = pts[j];
      const Vec2& b1 = pts[(j + 1) % n];
      if (segments_intersect(a0, a1, b0, b1))
        throw InvalidGeometry("centerline self-intersects");
    }
  }
}

ReferenceTrajectory racing_line(const Track& track,
                                const VehicleParams& vehicle,
                                const ExpertParams& params) {
  const ArcLengthCurve& cl = track.centerline;
  const double length = cl.total_length();
  const int n = std::max(16, static_cast<int>(length / params.sample_ds));
  std::vector<Vec2> base(n);
  std::vector<double> s_at(n);
  for (int i = 0; i < n; ++i) {
    s_at[i] = length * i / n;
    base[i] = cl.position_at(s_at[i]);
  }
  std::vector<double> curv =
      circular_smooth(polygon_curvature(base), params.smooth_window);

  std::vector<double> lat(n);
  for (int i = 0; i < n; ++i) {
    // Cut toward the inside of the turn (left is positive lateral).
    const double hw = curv[i] >= 0.0 ? track.width_left_at(s_at[i])
                                     : track.width_right_at(s_at[i]);
    const double max_off = params.max_offset_frac * hw;
    lat[i] = std::clamp(params.curvature_gain * curv[i], -max_off, max_off);
  }
  // Smooth the offsets so corner entries and exits blend gradually.
  lat = circular_smooth(lat, 2 * params.smooth_window + 1);
  std::vector<Vec2> line(n);
  for (int i = 0; i < n; ++i)
    line[i] = base[i] + lat[i] * cl.normal_at(s_at[i]);
  ArcLengthCurve curve = build_curve(line, true);

  // Speed profile limited by lateral grip, then by longitudinal limits.
  std::vector<double> line_curv =
      circular_smooth(polygon_curvature(line), params.smooth_window);
  const double a_lat_max = params.lat_accel_frac * vehicle.mu * 9.81;
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    const double k = std::max(std::abs(line_curv[i]), 1e-6);
    v[i] = std::min(params.v_cap, std::sqrt(a_lat_max / k));
  }
  const auto& cum = curve.cum_s();
  auto seg_len = [&](int i) {
    const double next = i + 1 < n ? cum[i + 1] : curve.total_length();
    return next - cum[i];
  };
  for (int pass = 0; pass < 2; ++pass) {
    for (int i = 0; i < n; ++i) {
      const int j = (i + 1) % n;
      v[j] = std::min(
          v[j], std::sqrt(v[i] * v[i] + 2.0 * params.accel_long * seg_len(i)));
    }
    for (int i = n - 1; i >= 0; --i) {
      const int j = (i + 1) % n;
      v[i] = std::min(
          v[i], std::sqrt(v[j] * v[j] + 2.0 * params.brake_long * seg_len(i)));
    }
  }
  ReferenceTrajectory ref;
  ref.curve = std::move(curve);
  ref.speed = std::move(v);
  return ref;
}

DemoResult generate_demos(const Track& track, const VehicleParams& vehicle,
                          const ExpertParams& params, int n_demos,
                          uint64_t seed, int horizon) {
  if (n_demos < 1) throw InsufficientData("need at least one demonstration");
  const ReferenceTrajectory ref = racing_line(track, vehicle, params);
  const double lap_len = ref.curve.total_length();
  const double wheelbase = vehicle.lf + vehicle.lr;

  DemoResult result;
  std::vector<Eigen::VectorXd> all_obs;
  std::vector<Eigen::Vector2d> all_actions;
  std::vector<Pose> all_poses;
  std::vector<Vec2> all_after;
  std::vector<long> lap_begin;  // index of each lap's first sample

  for (int d = 0; d < n_demos; ++d) {
    std::mt19937_64 rng(derive_seed(seed, 8, static_cast<uint64_t>(d)));
    const PhaseNoise lat_noise =
        PhaseNoise::draw(rng, params.noise_harmonics, params.noise_lateral);
    const PhaseNoise speed_noise =
        PhaseNoise::draw(rng, params.noise_harmonics, params.noise_speed);

    RaceEnv env(track, vehicle);
    env.reset(ref);
    lap_begin.push_back(static_cast<long>(all_obs.size()));

    std::vector<Vec2> lap_points;
    std::vector<double> lap_speeds;
    double progress = 0.0;
    double prev_s = ref.curve.project(env.state().position).s;
    long steps = 0;
    while (progress < lap_len) {
      if (++steps > params.max_lap_steps)
        throw ExpertFailed("lap did not complete within the step budget");
      const VehicleState& st = env.state();
      const Eigen::VectorXd obs = env.observe();

      const double v = std::max(st.v_long, 1.0);
      const Projection proj = ref.curve.project(st.position);
      const double ld = std::clamp(v * params.lookahead_time,
                                   params.lookahead_min, params.lookahead_max);
      const double s_la = proj.s + ld;
      const double phase = ref.curve.normalize_s(s_la) / lap_len;
      const Vec2 target = ref.curve.position_at(s_la) +
                          lat_noise.at(phase) * ref.curve.normal_at(s_la);
      const Vec2 local = to_local(st.pose(), target);
      const double alpha = std::atan2(local.y(), local.x());
      const double steer =
          std::atan2(2.0 * wheelbase * std::sin(alpha), ld) / vehicle.steer_max;
      const double v_tgt =
          ref.speed_at(s_la) * (1.0 + speed_noise.at(phase));
      const double throttle = params.kp_speed * (v_tgt - st.v_long);

      const Eigen::Vector2d desired(std::clamp(throttle, -1.0, 1.0),
                                    std::clamp(steer, -1.0, 1.0));
      const double lim = vehicle.action_rate_limit;
      const Eigen::Vector2d inc(
          std::clamp(desired(0) - st.current_action(0), -lim, lim),
          std::clamp(desired(1) - st.current_action(1), -lim, lim));

      const StepOutcome out = env.step({inc(0), inc(1)});
      if (out.terminated != Termination::kNone)
        throw ExpertFailed("scripted lap terminated: demo " +
                           std::to_string(d));

      all_obs.push_back(obs);
      all_actions.push_back(inc);
      all_poses.push_back(st.pose());
      all_after.push_back(out.next_state.position);
      lap_points.push_back(out.next_state.position);
      lap_speeds.push_back(std::max(out.next_state.v_long, 1.0));

      const double s_now = ref.curve.project(out.next_state.position).s;
      progress += ref.curve.progress(prev_s, s_now);
      prev_s = s_now;
    }
    ReferenceTrajectory lap;
    lap.curve = build_curve(lap_points, false);
    lap.speed = lap_speeds;
    result.laps.push_back(std::move(lap));
  }
  lap_begin.push_back(static_cast<long>(all_obs.size()));

  const long total = static_cast<long>(all_obs.size());
  DemoDataset& ds = result.dataset;
  ds.observations.resize(total, kObservationSize);
  ds.actions.resize(total, kActionSize);
  ds.futures.assign(total, {});
  ds.has_future.assign(total, 0);
  for (long i = 0; i < total; ++i) {
    ds.observations.row(i) = all_obs[i].transpose();
    ds.actions.row(i) = all_actions[i].transpose();
  }
  for (size_t lap = 0; lap + 1 < lap_begin.size(); ++lap) {
    const long begin = lap_begin[lap], end = lap_begin[lap + 1];
    for (long t = begin; t + horizon <= end; ++t) {
      std::vector<Eigen::Vector2d> fut(horizon);
      for (int u = 0; u < horizon; ++u)
        fut[u] = to_local(all_poses[t], all_after[t + u]);
      ds.futures[t] = std::move(fut);
      ds.has_future[t] = 1;
    }
  }
  return result;
}

}  // namespace sbrl
