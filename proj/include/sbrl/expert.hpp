#ifndef SBRL_EXPERT_HPP_
#define SBRL_EXPERT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sbrl/env.hpp"
#include "sbrl/geometry.hpp"
#include "sbrl/trainer.hpp"

namespace sbrl {

// Closed oval: two straights joined by two half circles, constant width.
Track make_oval_track(double straight_length, double corner_radius,
                      double half_width, double spacing = 2.0);

// Closed circuit from a radial Fourier perturbation of a circle. Throws
// InvalidGeometry when the draw self-intersects or pinches the boundary.
Track make_random_circuit(uint64_t seed, double mean_radius,
                          double half_width, int n_points = 400,
                          double roughness = 0.12);

// Sanity checks shared by the generators: enough points, positive widths,
// boundary curves that do not cross the centerline curvature limit.
void validate_track(const Track& track);

struct ExpertParams {
  double curvature_gain = 300.0;   // m^2, apex-cut offset per curvature
  double max_offset_frac = 0.7;    // fraction of half width used for the line
  int smooth_window = 15;          // curvature smoothing, samples
  double sample_ds = 2.0;          // racing-line resolution, m
  double lat_accel_frac = 0.7;     // fraction of mu*g allowed laterally
  double accel_long = 6.0;         // m/s^2 forward limit in the speed profile
  double brake_long = 12.0;        // m/s^2 braking limit
  double v_cap = 80.0;             // m/s
  double lookahead_time = 0.6;     // s
  double lookahead_min = 6.0;      // m
  double lookahead_max = 40.0;     // m
  double kp_speed = 0.4;           // throttle gain per m/s of speed error
  double noise_lateral = 1.0;      // m, per-lap line noise amplitude
  double noise_speed = 0.05;       // fractional speed-target noise
  int noise_harmonics = 4;
  long max_lap_steps = 20000;
};

// Curvature-aware racing line with a forward/backward limited speed profile.
ReferenceTrajectory racing_line(const Track& track,
                                const VehicleParams& vehicle,
                                const ExpertParams& params);

struct DemoResult {
  std::vector<ReferenceTrajectory> laps;  // one recorded lap per demo
  DemoDataset dataset;
};

// Drives `n_demos` noisy laps with the scripted controller and records the
// observations, action increments, and realized futures. Throws ExpertFailed
// if a lap terminates unhealthily.
DemoResult generate_demos(const Track& track, const VehicleParams& vehicle,
                          const ExpertParams& params, int n_demos,
                          uint64_t seed, int horizon);

}  // namespace sbrl

#endif  // SBRL_EXPERT_HPP_
