#include "sbrl/env.hpp"

#include <cmath>

#include "sbrl/errors.hpp"

namespace sbrl {

namespace {
constexpr double kGravity = 9.81;
constexpr double kSanitySpeed = 150.0;   // m/s
constexpr double kSanityYawRate = 20.0;  // rad/s
}  // namespace

VehicleParams VehicleParams::from_config(const Config& cfg) {
  VehicleParams p;
  p.mass = cfg.get_double("vehicle.mass", p.mass);
  p.yaw_inertia = cfg.get_double("vehicle.yaw_inertia", p.yaw_inertia);
  p.lf = cfg.get_double("vehicle.lf", p.lf);
  p.lr = cfg.get_double("vehicle.lr", p.lr);
  p.cornering_stiffness =
      cfg.get_double("vehicle.cornering_stiffness", p.cornering_stiffness);
  p.mu = cfg.get_double("vehicle.mu", p.mu);
  p.f_drive_max = cfg.get_double("vehicle.f_drive_max", p.f_drive_max);
  p.f_brake_max = cfg.get_double("vehicle.f_brake_max", p.f_brake_max);
  p.brake_front_share =
      cfg.get_double("vehicle.brake_front_share", p.brake_front_share);
  p.drag_coef = cfg.get_double("vehicle.drag_coef", p.drag_coef);
  p.steer_max = cfg.get_double("vehicle.steer_max", p.steer_max);
  p.dt = cfg.get_double("vehicle.dt", p.dt);
  p.action_rate_limit =
      cfg.get_double("vehicle.action_rate_limit", p.action_rate_limit);
  p.off_track_margin =
      cfg.get_double("vehicle.off_track_margin", p.off_track_margin);
  p.spin_heading_limit =
      cfg.get_double("vehicle.spin_heading_limit", p.spin_heading_limit);
  p.spin_slip_limit =
      cfg.get_double("vehicle.spin_slip_limit", p.spin_slip_limit);
  p.slow_speed = cfg.get_double("vehicle.slow_speed", p.slow_speed);
  p.grace_steps = cfg.get_int("vehicle.grace_steps", p.grace_steps);
  return p;
}

Eigen::Vector2d apply_action(const VehicleState& state,
                             const RelativeAction& delta,
                             const VehicleParams& params) {
  const double lim = params.action_rate_limit;
  const Eigen::Vector2d inc(std::clamp(delta.d_alpha, -lim, lim),
                            std::clamp(delta.d_delta, -lim, lim));
  return (state.current_action + inc).cwiseMax(-1.0).cwiseMin(1.0);
}

VehicleState step_dynamics(const VehicleState& state,
                           const Eigen::Vector2d& action,
                           const VehicleParams& params) {
  const double dt = params.dt;
  const double alpha = action(0);
  const double steer = action(1) * params.steer_max;

  const double fz_front =
      params.mass * kGravity * params.lr / (params.lf + params.lr);
  const double fz_rear =
      params.mass * kGravity * params.lf / (params.lf + params.lr);

  // Slip angles from body velocities and geometry.
  const double beta_f =
      std::atan2(state.v_lat + params.lf * state.yaw_rate, state.v_long) -
      steer;
  const double beta_r =
      std::atan2(state.v_lat - params.lr * state.yaw_rate, state.v_long);

  // Linear cornering force saturated at the friction limit.
  const double fy_front =
      std::clamp(-params.cornering_stiffness * beta_f,
                 -params.mu * fz_front, params.mu * fz_front);
  const double fy_rear =
      std::clamp(-params.cornering_stiffness * beta_r,
                 -params.mu * fz_rear, params.mu * fz_rear);

  // Longitudinal: drive on the rear axle, braking split between axles and
  // faded out below 1 m/s so a braking car comes to rest instead of
  // oscillating around zero speed.
  const double drive = std::max(alpha, 0.0) * params.f_drive_max;
  const double brake_demand = std::max(-alpha, 0.0) * params.f_brake_max;
  const double brake_fade = std::min(1.0, std::abs(state.v_long) / 1.0);
  const double brake =
      -brake_demand * brake_fade * (state.v_long >= 0.0 ? 1.0 : -1.0);
  const double fx_front = params.brake_front_share * brake;
  const double fx_rear = drive + (1.0 - params.brake_front_share) * brake;

  const double v = state.speed();
  const double drag_long = -params.drag_coef * v * state.v_long;
  const double drag_lat = -params.drag_coef * v * state.v_lat;

  const double acc_long =
      (fx_rear + fx_front * std::cos(steer) - fy_front * std::sin(steer) +
       drag_long) /
          params.mass +
      state.v_lat * state.yaw_rate;
  const double acc_lat =
      (fy_rear + fy_front * std::cos(steer) + fx_front * std::sin(steer) +
       drag_lat) /
          params.mass -
      state.v_long * state.yaw_rate;
  const double yaw_acc = (params.lf * (fy_front * std::cos(steer) +
                                       fx_front * std::sin(steer)) -
                          params.lr * fy_rear) /
                         params.yaw_inertia;

  // Semi-implicit Euler: velocities first, then pose with the new values.
  VehicleState next = state;
  next.v_long = state.v_long + acc_long * dt;
  next.v_lat = state.v_lat + acc_lat * dt;
  next.yaw_rate = state.yaw_rate + yaw_acc * dt;
  next.heading = state.heading + next.yaw_rate * dt;
  const double c = std::cos(next.heading), s = std::sin(next.heading);
  next.position.x() += (c * next.v_long - s * next.v_lat) * dt;
  next.position.y() += (s * next.v_long + c * next.v_lat) * dt;

  next.a_long = (next.v_long - state.v_long) / dt;
  next.a_lat = (next.v_lat - state.v_lat) / dt;
  next.slip_angle_front = beta_f;
  next.slip_angle_rear = beta_r;
  // Proxy: commanded longitudinal force over the friction-limited force.
  next.slip_ratio_front = fx_front / (params.mu * fz_front);
  next.slip_ratio_rear = fx_rear / (params.mu * fz_rear);
  next.current_action = action;

  if (!next.position.allFinite() || !std::isfinite(next.heading) ||
      !std::isfinite(next.v_long) || !std::isfinite(next.v_lat) ||
      !std::isfinite(next.yaw_rate) || next.speed() > kSanitySpeed ||
      std::abs(next.yaw_rate) > kSanityYawRate)
    throw NumericalBlowup("vehicle state exceeded sanity bounds");
  return next;
}

namespace {

double angle_diff(double a, double b) {
  double d = std::fmod(a - b, 2.0 * M_PI);
  if (d > M_PI) d -= 2.0 * M_PI;
  if (d < -M_PI) d += 2.0 * M_PI;
  return d;
}

}  // namespace

Termination check_termination(const VehicleState& state, const Track& track,
                              long steps_elapsed,
                              const VehicleParams& params) {
  const Projection proj = track.centerline.project(state.position);
  const double bound = (proj.lateral >= 0.0 ? track.width_left_at(proj.s)
                                            : track.width_right_at(proj.s)) +
                       params.off_track_margin;
  if (std::abs(proj.lateral) > bound) return Termination::kOffTrack;

  const Vec2 tangent = track.centerline.tangent_at(proj.s);
  const double track_angle = std::atan2(tangent.y(), tangent.x());
  if (std::abs(angle_diff(state.heading, track_angle)) >
          params.spin_heading_limit ||
      std::abs(state.slip_angle_rear) > params.spin_slip_limit)
    return Termination::kSpin;

  if (steps_elapsed > params.grace_steps && state.speed() < params.slow_speed)
    return Termination::kSlow;
  return Termination::kNone;
}

Eigen::VectorXd observe(const VehicleState& state, const Track& track,
                        const ReferenceTrajectory& ref,
                        const ObservationScales& scales) {
  Eigen::VectorXd obs(kObservationSize);
  int k = 0;
  obs(k++) = state.speed() / scales.velocity;
  obs(k++) = state.a_long / scales.acceleration;
  obs(k++) = state.a_lat / scales.acceleration;
  obs(k++) = state.slip_ratio_front / scales.ratio;
  obs(k++) = state.slip_ratio_rear / scales.ratio;
  obs(k++) = state.slip_angle_front / scales.angle;
  obs(k++) = state.slip_angle_rear / scales.angle;
  const Pose pose = state.pose();
  for (double v : boundary_observation(track, pose))
    obs(k++) = v / scales.position;
  for (double v : waypoint_observation(ref, pose))
    obs(k++) = v / scales.position;
  obs(k++) = state.current_action(0);
  obs(k++) = state.current_action(1);
  return obs;
}

RaceEnv::RaceEnv(Track track, VehicleParams params)
    : track_(std::move(track)), params_(params) {}

void RaceEnv::reset(const ReferenceTrajectory& ref) {
  ref_ = ref;
  state_ = VehicleState{};
  state_.position = ref_.curve.position_at(0.0);
  const Vec2 t = ref_.curve.tangent_at(0.0);
  state_.heading = std::atan2(t.y(), t.x());
  state_.v_long = ref_.speed_at(0.0);
  steps_elapsed_ = 0;
}

void RaceEnv::set_state(const VehicleState& state, long steps_elapsed) {
  state_ = state;
  steps_elapsed_ = steps_elapsed;
}

StepOutcome RaceEnv::step(const RelativeAction& delta) {
  const Eigen::Vector2d action = apply_action(state_, delta, params_);
  StepOutcome out;
  out.next_state = step_dynamics(state_, action, params_);
  out.dt = params_.dt;
  ++steps_elapsed_;
  out.terminated =
      check_termination(out.next_state, track_, steps_elapsed_, params_);
  state_ = out.next_state;
  return out;
}

Eigen::VectorXd RaceEnv::observe() const {
  return sbrl::observe(state_, track_, ref_);
}

}  // namespace sbrl
