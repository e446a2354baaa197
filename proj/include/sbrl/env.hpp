#ifndef SBRL_ENV_HPP_
#define SBRL_ENV_HPP_

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "sbrl/config.hpp"
#include "sbrl/geometry.hpp"

namespace sbrl {

inline constexpr int kObservationSize = 77;
inline constexpr int kActionSize = 2;

/// Dynamic bicycle model parameters plus termination thresholds. Defaults
/// describe a desk-scale race car; every value can be overridden from the
/// [vehicle] config section.
struct VehicleParams {
  double mass = 800.0;              // kg
  double yaw_inertia = 1000.0;      // kg m^2
  double lf = 1.6;                  // m, CoG to front axle
  double lr = 1.4;                  // m, CoG to rear axle
  double cornering_stiffness = 80e3;  // N/rad per axle
  double mu = 1.5;                  // tire friction coefficient
  double f_drive_max = 12e3;        // N
  double f_brake_max = 20e3;        // N
  double brake_front_share = 0.6;
  double drag_coef = 0.6;           // N s^2/m^2
  double steer_max = 0.4;           // rad at delta = 1
  double dt = 0.02;                 // s
  double action_rate_limit = 0.1;   // max |increment| per step

  double off_track_margin = 0.5;    // m beyond the half width
  double spin_heading_limit = M_PI / 2.0;  // rad vs. track tangent
  double spin_slip_limit = 30.0 * M_PI / 180.0;  // rad, |beta_R|
  double slow_speed = 3.0;          // m/s
  int grace_steps = 100;

  static VehicleParams from_config(const Config& cfg);
};

struct VehicleState {
  Vec2 position{0.0, 0.0};
  double heading = 0.0;
  double v_long = 0.0;
  double v_lat = 0.0;
  double yaw_rate = 0.0;
  double a_long = 0.0;
  double a_lat = 0.0;
  double slip_angle_front = 0.0;
  double slip_angle_rear = 0.0;
  double slip_ratio_front = 0.0;
  double slip_ratio_rear = 0.0;
  Eigen::Vector2d current_action{0.0, 0.0};  // (alpha, delta) in [-1,1]^2

  Pose pose() const { return Pose{position, heading}; }
  double speed() const { return std::hypot(v_long, v_lat); }
};

struct RelativeAction {
  double d_alpha = 0.0;
  double d_delta = 0.0;
};

enum class Termination { kNone, kOffTrack, kSpin, kSlow };

struct StepOutcome {
  VehicleState next_state;
  Termination terminated = Termination::kNone;
  double dt = 0.0;
};

// a_t = clip(a_{t-1} + delta, -1, 1); the increment itself is rate-limited
// before integration.
Eigen::Vector2d apply_action(const VehicleState& state,
                             const RelativeAction& delta,
                             const VehicleParams& params);

// One semi-implicit Euler step of the bicycle model with the given absolute
// action already applied to the state.
VehicleState step_dynamics(const VehicleState& state,
                           const Eigen::Vector2d& action,
                           const VehicleParams& params);

Termination check_termination(const VehicleState& state, const Track& track,
                              long steps_elapsed, const VehicleParams& params);

// Fixed per-group observation scales.
struct ObservationScales {
  double velocity = 50.0;
  double acceleration = 20.0;
  double angle = 0.5;
  double ratio = 1.0;
  double position = 100.0;
};

// 77 scalars: 7 vehicle states, 28 boundary values, 40 waypoint values,
// 2 current actions, in this order.
Eigen::VectorXd observe(const VehicleState& state, const Track& track,
                        const ReferenceTrajectory& ref,
                        const ObservationScales& scales = {});

/// Stateful environment wrapper owned by a single rollout worker.
class RaceEnv {
 public:
  RaceEnv(Track track, VehicleParams params);

  // Spawns at the reference start, at reference speed, aligned heading.
  void reset(const ReferenceTrajectory& ref);
  void set_state(const VehicleState& state, long steps_elapsed);

  StepOutcome step(const RelativeAction& delta);
  Eigen::VectorXd observe() const;

  const VehicleState& state() const { return state_; }
  const Track& track() const { return track_; }
  const ReferenceTrajectory& reference() const { return ref_; }
  const VehicleParams& params() const { return params_; }
  long steps_elapsed() const { return steps_elapsed_; }

 private:
  Track track_;
  VehicleParams params_;
  ReferenceTrajectory ref_;
  VehicleState state_;
  long steps_elapsed_ = 0;
};

}  // namespace sbrl

#endif  // SBRL_ENV_HPP_
