// Command-line front end: track generation, demonstrations, pretraining,
// training, evaluation, and Pareto-front extraction.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sbrl/config.hpp"
#include "sbrl/env.hpp"
#include "sbrl/errors.hpp"
#include "sbrl/experiment.hpp"
#include "sbrl/expert.hpp"
#include "sbrl/policy.hpp"
#include "sbrl/rtd.hpp"
#include "sbrl/trainer.hpp"

namespace fs = std::filesystem;
using namespace sbrl;

namespace {

ExpertParams expert_from_config(const Config& cfg) {
  ExpertParams p;
  p.curvature_gain = cfg.get_double("expert.curvature_gain", p.curvature_gain);
  p.max_offset_frac =
      cfg.get_double("expert.max_offset_frac", p.max_offset_frac);
  p.smooth_window = cfg.get_int("expert.smooth_window", p.smooth_window);
  p.lat_accel_frac = cfg.get_double("expert.lat_accel_frac", p.lat_accel_frac);
  p.accel_long = cfg.get_double("expert.accel_long", p.accel_long);
  p.brake_long = cfg.get_double("expert.brake_long", p.brake_long);
  p.v_cap = cfg.get_double("expert.v_cap", p.v_cap);
  p.lookahead_time = cfg.get_double("expert.lookahead_time", p.lookahead_time);
  p.kp_speed = cfg.get_double("expert.kp_speed", p.kp_speed);
  p.noise_lateral = cfg.get_double("expert.noise_lateral", p.noise_lateral);
  p.noise_speed = cfg.get_double("expert.noise_speed", p.noise_speed);
  return p;
}

Track track_from_config(const Config& cfg, uint64_t seed) {
  const std::string type = cfg.get_string("track.type", "oval");
  const double half_width = cfg.get_double("track.half_width", 8.0);
  if (type == "oval") {
    return make_oval_track(cfg.get_double("track.straight_length", 200.0),
                           cfg.get_double("track.corner_radius", 40.0),
                           half_width);
  }
  if (type == "random") {
    return make_random_circuit(seed,
                               cfg.get_double("track.mean_radius", 120.0),
                               half_width,
                               cfg.get_int("track.n_points", 400),
                               cfg.get_double("track.roughness", 0.12));
  }
  throw ConfigError("unknown track.type: " + type);
}

struct DemoArtifacts {
  DemoResult demos;
  TrajectoryDistributionModel rtd;
};

DemoArtifacts build_demos(const Config& cfg, const Track& track,
                          uint64_t seed) {
  const VehicleParams vehicle = VehicleParams::from_config(cfg);
  const ExpertParams expert = expert_from_config(cfg);
  const int n_demos = cfg.get_int("expert.n_demos", 12);
  const int horizon = cfg.get_int("policy.horizon", 100);
  DemoArtifacts out;
  out.demos = generate_demos(track, vehicle, expert, n_demos, seed, horizon);
  const RBFBasis basis =
      RBFBasis::make(cfg.get_int("rtd.n_basis", 20),
                     cfg.get_bool("rtd.periodic", true),
                     cfg.get_double("rtd.ridge", 1e-6));
  std::vector<TrajectoryWeights> weights;
  for (const ReferenceTrajectory& lap : out.demos.laps)
    weights.push_back(fit_weights(lap, track, basis).weights);
  out.rtd = fit_rtd(weights, basis, "track");
  return out;
}

PolicyBundle load_policy_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open policy: " + path);
  return PolicyBundle::load(in);
}

void save_policy_file(const PolicyBundle& policy, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write policy: " + path);
  policy.save(out);
}

Trainer make_trainer(const Config& cfg, Track track,
                     TrajectoryDistributionModel rtd, PolicyBundle policy,
                     uint64_t seed) {
  TrainerConfig tc = TrainerConfig::from_config(cfg);
  tc.seed = seed;
  return Trainer(std::move(track), std::move(rtd), std::move(policy), tc,
                 RewardConfig::from_config(cfg),
                 VehicleParams::from_config(cfg));
}

int run(int argc, char** argv) {
  CLI::App app{"Style-constrained race driving trainer"};
  app.require_subcommand(1);

  std::string config_path, track_path, rtd_path, policy_path, resume_path;
  std::string out_path;
  uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_track) {
    cmd->add_option("--config", config_path, "configuration file");
    cmd->add_option("--seed", seed, "run seed");
    cmd->add_option("--out", out_path, "output path")->required();
    if (needs_track)
      cmd->add_option("--track", track_path, "track file")->required();
  };

  auto* gen_track = app.add_subcommand("gen-track", "generate a track file");
  add_common(gen_track, false);

  auto* gen_demos =
      app.add_subcommand("gen-demos", "record expert laps and fit the "
                                      "trajectory distribution");
  add_common(gen_demos, true);

  auto* pretrain = app.add_subcommand(
      "pretrain", "behavior-clone the policy from expert laps");
  add_common(pretrain, true);

  auto* train = app.add_subcommand("train", "run the training loop");
  add_common(train, true);
  train->add_option("--rtd", rtd_path, "trajectory distribution file")
      ->required();
  train->add_option("--policy", policy_path, "pretrained policy file");
  train->add_option("--resume", resume_path, "checkpoint to resume from");

  auto* eval = app.add_subcommand("eval", "evaluate a trained policy");
  add_common(eval, true);
  eval->add_option("--rtd", rtd_path, "trajectory distribution file")
      ->required();
  eval->add_option("--policy", policy_path, "policy file")->required();

  auto* pareto = app.add_subcommand(
      "pareto", "print the lap-time / style-offset front of lap records");
  std::vector<std::string> record_files;
  pareto->add_option("--in", record_files, "lap record CSV files")->required();
  pareto->add_option("--out", out_path, "output CSV");

  CLI11_PARSE(app, argc, argv);

  Config cfg;
  if (!config_path.empty()) cfg = Config::load(config_path);

  if (gen_track->parsed()) {
    const Track track = track_from_config(cfg, seed);
    save_track(track, out_path);
    std::cout << "track: " << track.centerline.points().size() << " points, "
              << track.centerline.total_length() << " m\n";
    return 0;
  }

  if (gen_demos->parsed()) {
    const Track track = load_track(track_path);
    const DemoArtifacts art = build_demos(cfg, track, seed);
    fs::create_directories(out_path);
    for (size_t i = 0; i < art.demos.laps.size(); ++i)
      save_reference(art.demos.laps[i],
                     out_path + "/demo_" + std::to_string(i) + ".txt");
    save_rtd(art.rtd, out_path + "/rtd.txt");
    std::cout << "demos: " << art.demos.laps.size() << " laps, "
              << art.demos.dataset.size() << " samples\n";
    return 0;
  }

  if (pretrain->parsed()) {
    const Track track = load_track(track_path);
    const DemoArtifacts art = build_demos(cfg, track, seed);
    std::mt19937_64 init_rng(derive_seed(seed, 10, 0));
    PolicyBundle policy(PolicyConfig::from_config(cfg), init_rng);
    Trainer trainer = make_trainer(cfg, track, art.rtd, std::move(policy),
                                   seed);
    const PretrainStats stats = trainer.pretrain(art.demos.dataset);
    fs::create_directories(out_path);
    save_policy_file(trainer.policy(), out_path + "/policy.bin");
    save_rtd(art.rtd, out_path + "/rtd.txt");
    std::cout << "pretrain: bc_loss " << stats.bc_loss << ", predictor_ll "
              << stats.predictor_ll << " after " << stats.epochs
              << " epochs\n";
    return 0;
  }

  if (train->parsed()) {
    const Track track = load_track(track_path);
    const TrajectoryDistributionModel rtd = load_rtd(rtd_path);
    PolicyBundle policy = [&] {
      if (!policy_path.empty()) return load_policy_file(policy_path);
      std::mt19937_64 init_rng(derive_seed(seed, 10, 0));
      return PolicyBundle(PolicyConfig::from_config(cfg), init_rng);
    }();
    Trainer trainer = make_trainer(cfg, track, rtd, std::move(policy), seed);
    if (!resume_path.empty()) trainer.load_checkpoint(resume_path);
    trainer.train(out_path);
    save_policy_file(trainer.policy(), out_path + "/policy.bin");
    std::cout << "train: " << trainer.env_steps() << " steps, "
              << trainer.update_index() << " updates, alpha_s "
              << trainer.alpha_s() << "\n";
    return 0;
  }

  if (eval->parsed()) {
    const Track track = load_track(track_path);
    const TrajectoryDistributionModel rtd = load_rtd(rtd_path);
    const PolicyBundle policy = load_policy_file(policy_path);
    EvalConfig ec;
    ec.episodes = cfg.get_int("eval.episodes", 10);
    ec.max_steps = cfg.get_long("eval.max_steps", 20000);
    ec.seed = seed;
    const auto records =
        evaluate(policy, track, rtd, VehicleParams::from_config(cfg), ec);
    save_lap_records(records, out_path);
    const EvalSummary s = summarize(records);
    std::cout << "eval: " << s.finished << "/" << s.episodes
              << " episodes with a lap, best " << s.best_lap << " s, mean "
              << s.mean_lap << " s, mean offset " << s.mean_mro << " m\n";
    return 0;
  }

  if (pareto->parsed()) {
    std::vector<LapRecord> all;
    for (const std::string& file : record_files) {
      const auto records = load_lap_records(file);
      all.insert(all.end(), records.begin(), records.end());
    }
    std::vector<Eigen::Vector2d> pts;
    std::vector<LapRecord> finished;
    for (const LapRecord& r : all) {
      if (!r.finished) continue;
      finished.push_back(r);
      pts.emplace_back(r.lap_time, r.mro);
    }
    const std::vector<int> front = pareto_front(pts);
    std::vector<LapRecord> front_records;
    std::cout << "lap_time,mro\n";
    for (int idx : front) {
      front_records.push_back(finished[idx]);
      std::cout << pts[idx].x() << ',' << pts[idx].y() << '\n';
    }
    if (!out_path.empty()) save_lap_records(front_records, out_path);
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
