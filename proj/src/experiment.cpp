#include "sbrl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "sbrl/errors.hpp"
#include "sbrl/trainer.hpp"

namespace sbrl {

double mean_reference_offset(const std::vector<Vec2>& positions,
                             const ArcLengthCurve& ref) {
  if (positions.empty()) throw EmptyBatch("no positions");
  double acc = 0.0;
  for (const Vec2& p : positions) acc += (p - ref.project(p).foot).norm();
  return acc / static_cast<double>(positions.size());
}

std::vector<int> pareto_front(const std::vector<Eigen::Vector2d>& points) {
  std::vector<int> order(points.size());
  for (size_t i = 0; i < points.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (points[a].x() != points[b].x()) return points[a].x() < points[b].x();
    return points[a].y() < points[b].y();
  });
  std::vector<int> front;
  double best_y = std::numeric_limits<double>::infinity();
  for (int idx : order) {
    if (points[idx].y() < best_y) {
      front.push_back(idx);
      best_y = points[idx].y();
    }
  }
  return front;
}

std::vector<LapRecord> evaluate(const PolicyBundle& policy, const Track& track,
                                const TrajectoryDistributionModel& rtd,
                                const VehicleParams& vehicle,
                                const EvalConfig& cfg, long update) {
  std::vector<LapRecord> records;
  const double lap_len = track.centerline.total_length();
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const uint64_t ep_seed =
        derive_seed(cfg.seed, 7, static_cast<uint64_t>(ep));
    const ReferenceTrajectory ref = sample_reference(rtd, track, ep_seed);
    RaceEnv env(track, vehicle);
    env.reset(ref);
    std::mt19937_64 act_rng(derive_seed(cfg.seed, 9,
                                        static_cast<uint64_t>(ep)));

    double offset_sum = 0.0;
    long steps = 0;
    double total_progress = 0.0;
    double lap_progress = 0.0;
    double lap_start_time = 0.0;
    double best_lap = -1.0;
    while (steps < cfg.max_steps) {
      const Eigen::VectorXd obs = env.observe();
      Eigen::Vector2d action;
      if (cfg.deterministic) {
        action = policy.act_mean(obs);
      } else {
        action = policy.act(obs, act_rng).action;
      }
      const Vec2 prev = env.state().position;
      const StepOutcome out = env.step({action(0), action(1)});
      ++steps;
      const Vec2 pos = out.next_state.position;
      offset_sum += (pos - ref.curve.project(pos).foot).norm();
      const double dp = progress_reward(prev, pos, track.centerline);
      total_progress += dp;
      lap_progress += dp;
      if (lap_progress >= lap_len && dp > 0.0) {
        const double overshoot = lap_progress - lap_len;
        const double frac = std::min(1.0, overshoot / dp);
        const double finish =
            static_cast<double>(steps) * vehicle.dt - frac * vehicle.dt;
        const double lap_time = finish - lap_start_time;
        if (best_lap < 0.0 || lap_time < best_lap) best_lap = lap_time;
        lap_start_time = finish;
        lap_progress = overshoot;
      }
      if (out.terminated != Termination::kNone) break;
    }
    LapRecord rec;
    rec.lap_time = best_lap;
    rec.mro = steps > 0 ? offset_sum / steps : 0.0;
    rec.progress = total_progress;
    rec.seed = ep_seed;
    rec.update = update;
    rec.finished = best_lap >= 0.0;
    records.push_back(rec);
  }
  return records;
}

EvalSummary summarize(const std::vector<LapRecord>& records) {
  EvalSummary s;
  s.episodes = static_cast<int>(records.size());
  double lap_acc = 0.0, mro_acc = 0.0;
  for (const LapRecord& r : records) {
    mro_acc += r.mro;
    if (r.finished) {
      ++s.finished;
      lap_acc += r.lap_time;
      if (s.best_lap < 0.0 || r.lap_time < s.best_lap) s.best_lap = r.lap_time;
    }
  }
  if (s.finished > 0) s.mean_lap = lap_acc / s.finished;
  if (s.episodes > 0) s.mean_mro = mro_acc / s.episodes;
  return s;
}

void save_lap_records(const std::vector<LapRecord>& records,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write lap records: " + path);
  out.precision(17);
  out << "lap_time,mro,progress,seed,update,finished\n";
  for (const LapRecord& r : records)
    out << r.lap_time << ',' << r.mro << ',' << r.progress << ',' << r.seed
        << ',' << r.update << ',' << (r.finished ? 1 : 0) << '\n';
  if (!out) throw IoError("failed to write lap records: " + path);
}

std::vector<LapRecord> load_lap_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read lap records: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty lap record file: " + path);
  std::vector<LapRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    LapRecord r;
    std::getline(row, field, ',');
    r.lap_time = std::stod(field);
    std::getline(row, field, ',');
    r.mro = std::stod(field);
    std::getline(row, field, ',');
    r.progress = std::stod(field);
    std::getline(row, field, ',');
    r.seed = std::stoull(field);
    std::getline(row, field, ',');
    r.update = std::stol(field);
    std::getline(row, field, ',');
    r.finished = field == "1";
    records.push_back(r);
  }
  return records;
}

}  // namespace sbrl
