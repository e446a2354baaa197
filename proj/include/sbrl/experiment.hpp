#ifndef SBRL_EXPERIMENT_HPP_
#define SBRL_EXPERIMENT_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "sbrl/env.hpp"
#include "sbrl/policy.hpp"
#include "sbrl/rtd.hpp"

namespace sbrl {

struct EvalConfig {
  int episodes = 10;
  long max_steps = 20000;  // per episode
  uint64_t seed = 0;
  bool deterministic = true;  // mean action instead of sampling
};

/// One evaluation episode: best lap inside it (negative when none finished)
/// and the mean offset from the sampled style reference.
struct LapRecord {
  double lap_time = -1.0;
  double mro = 0.0;
  double progress = 0.0;  // total forward progress in the episode, m
  uint64_t seed = 0;
  long update = 0;
  bool finished = false;
};

// Mean distance between the positions and their projections onto the
// reference curve. Exact per-sample projection, no sampling.
double mean_reference_offset(const std::vector<Vec2>& positions,
                             const ArcLengthCurve& ref);

// Indices of the non-dominated points when minimizing both coordinates.
// Output is sorted by the first coordinate.
std::vector<int> pareto_front(const std::vector<Eigen::Vector2d>& points);

std::vector<LapRecord> evaluate(const PolicyBundle& policy, const Track& track,
                                const TrajectoryDistributionModel& rtd,
                                const VehicleParams& vehicle,
                                const EvalConfig& cfg, long update = 0);

struct EvalSummary {
  double best_lap = -1.0;
  double mean_lap = -1.0;   // over finished episodes
  double mean_mro = 0.0;
  int finished = 0;
  int episodes = 0;
};

EvalSummary summarize(const std::vector<LapRecord>& records);

void save_lap_records(const std::vector<LapRecord>& records,
                      const std::string& path);
std::vector<LapRecord> load_lap_records(const std::string& path);

}  // namespace sbrl

#endif  // SBRL_EXPERIMENT_HPP_
