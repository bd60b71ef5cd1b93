// Command-line pipeline: generate ground-truth data, train an MVNN drift,
// roll out the learned dynamics, and evaluate densities and distributional
// metrics. Exit codes: 0 ok, 2 config/validation error, 3 numeric failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <nlohmann/json.hpp>
#include <thread>

#include "meanfield/config.hpp"
#include "meanfield/dynamics.hpp"
#include "meanfield/errors.hpp"
#include "meanfield/io.hpp"
#include "meanfield/metrics.hpp"
#include "meanfield/mvnn.hpp"
#include "meanfield/rng.hpp"
#include "meanfield/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace meanfield;

namespace {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("MEANFIELD_LOG");
  if (!env) return LogLevel::kInfo;
  const std::string v(env);
  if (v == "error") return LogLevel::kError;
  if (v == "debug") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::cerr << "[info] " << msg << "\n";
}

// Initial state for one trajectory; multigroup systems sample each group
// independently from the shared init spec.
ParticleState make_initial(const ExperimentConfig& cfg, std::uint64_t traj_seed) {
  if (cfg.system.drift_form == DriftForm::kMultigroup) {
    const auto& sizes = cfg.system.multigroup->group_sizes;
    ParticleState state;
    state.group_sizes = sizes;
    int total = 0;
    for (int n : sizes) total += n;
    state.positions.resize(cfg.system.dimension, total);
    int off = 0;
    for (std::size_t g = 0; g < sizes.size(); ++g) {
      const ParticleState block =
          sample_initial(cfg.init, sizes[g], rng::mix(traj_seed, 0x6701, g));
      state.positions.middleCols(off, sizes[g]) = block.positions;
      off += sizes[g];
    }
    return state;
  }
  return sample_initial(cfg.init, cfg.num_particles, traj_seed);
}

std::string traj_filename(int m) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "traj_%04d.mvnt", m);
  return buf;
}

int cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir, int threads) {
  fs::create_directories(out_dir);
  const std::string hash = config_hash(cfg);
  json manifest{{"config_hash", hash},
                {"N", cfg.num_particles},
                {"M", cfg.num_trajectories},
                {"L", cfg.num_steps},
                {"dt", cfg.dt},
                {"split", {{"train", cfg.train_count}, {"test", cfg.test_count}}},
                {"rng", "splitmix64-counter-v1"},
                {"trajectories", json::array()}};

  auto generate_one = [&](int m) {
    const std::uint64_t traj_seed = rng::mix(cfg.seed, 0x7241, m);
    Trajectory traj = simulate(cfg.system, make_initial(cfg, traj_seed), cfg.num_steps,
                               cfg.dt, cfg.seed, m);
    traj.config_hash = hash;
    write_trajectory((fs::path(out_dir) / traj_filename(m)).string(), traj);
    return traj_seed;
  };

  std::vector<std::uint64_t> seeds(cfg.num_trajectories);
  const int workers = std::max(1, threads);
  for (int begin = 0; begin < cfg.num_trajectories; begin += workers) {
    const int end = std::min(cfg.num_trajectories, begin + workers);
    std::vector<std::future<std::uint64_t>> futures;
    for (int m = begin; m < end; ++m)
      futures.push_back(std::async(std::launch::async, generate_one, m));
    for (int m = begin; m < end; ++m) seeds[m] = futures[m - begin].get();
  }
  for (int m = 0; m < cfg.num_trajectories; ++m)
    manifest["trajectories"].push_back(
        {{"file", traj_filename(m)}, {"seed", seeds[m]}, {"index", m}});

  std::ofstream out(fs::path(out_dir) / "manifest.json");
  out << manifest.dump(2) << '\n';
  log_info("generated " + std::to_string(cfg.num_trajectories) + " trajectories in " +
           out_dir);
  return 0;
}

std::vector<Trajectory> load_trajectories(const ExperimentConfig& cfg,
                                          const std::string& data_dir, bool force) {
  std::ifstream in(fs::path(data_dir) / "manifest.json");
  if (!in) throw ConfigError("missing manifest.json in " + data_dir);
  json manifest;
  in >> manifest;
  if (!force && manifest.value("config_hash", "") != config_hash(cfg))
    throw ConfigError("config hash mismatch with manifest (use --force to override)");
  std::vector<Trajectory> trajs;
  for (const auto& entry : manifest.at("trajectories"))
    trajs.push_back(
        read_trajectory((fs::path(data_dir) / entry.at("file").get<std::string>()).string()));
  return trajs;
}

int cmd_train(ExperimentConfig cfg, const std::string& data_dir,
              const std::string& out_path, bool force, int threads) {
  cfg.optim.threads = std::max(1, threads);
  const auto trajs = load_trajectories(cfg, data_dir, force);
  auto [train, test] = build_dataset(trajs, cfg.train_count, cfg.test_count);
  const Dataset* test_ptr = test.snapshots.empty() ? nullptr : &test;
  const std::string hash = config_hash(cfg);

  TrainResult result;
  if (cfg.system.drift_form == DriftForm::kMultigroup) {
    MgMvnnModel model =
        make_mg_mvnn(cfg.system.dimension,
                     static_cast<int>(cfg.system.multigroup->group_sizes.size()), cfg.model,
                     cfg.optim.seed);
    result = train_mg_mvnn(model, train, test_ptr, cfg.optim);
    write_checkpoint(out_path, model, hash);
  } else {
    MvnnModel model =
        make_mvnn(cfg.system.order, cfg.system.dimension, cfg.model, cfg.optim.seed);
    result = train_mvnn(model, train, test_ptr, cfg.optim);
    write_checkpoint(out_path, model, hash);
  }

  std::ofstream log_csv(out_path + ".log.csv");
  log_csv << "epoch,train_loss,test_loss\n";
  for (const auto& e : result.log)
    log_csv << e.epoch << ',' << e.train_loss << ',' << e.test_loss << '\n';
  log_info("final train loss " + std::to_string(result.final_train_loss));
  return 0;
}

int cmd_rollout(const ExperimentConfig& cfg, const std::string& checkpoint,
                const std::string& init_traj, int rollout_n, const std::string& out_path,
                std::uint64_t seed, bool force) {
  ParticleState init;
  if (!init_traj.empty()) {
    init = read_trajectory(init_traj).states.front();
  } else {
    ExperimentConfig init_cfg = cfg;
    if (rollout_n > 0) init_cfg.num_particles = rollout_n;
    init = make_initial(init_cfg, rng::mix(seed, 0x7241, 0));
  }

  const std::string kind = checkpoint_kind(checkpoint);
  const std::string ckpt_hash = checkpoint_config_hash(checkpoint);
  if (!force && !ckpt_hash.empty() && ckpt_hash != config_hash(cfg))
    throw ConfigError("config hash mismatch with checkpoint (use --force to override)");

  Trajectory traj;
  if (kind == "mg_mvnn") {
    const MgMvnnModel model = read_mg_checkpoint(checkpoint);
    if (model.d != cfg.system.dimension) throw ConfigError("checkpoint dimension mismatch");
    traj = mg_mvnn_rollout(model, init, cfg.system.sigma, cfg.dt, cfg.num_steps, seed);
  } else {
    const MvnnModel model = read_mvnn_checkpoint(checkpoint);
    if (model.d != cfg.system.dimension) throw ConfigError("checkpoint dimension mismatch");
    traj = mvnn_rollout(model, init, cfg.system.sigma, cfg.dt, cfg.num_steps, seed);
  }
  traj.config_hash = config_hash(cfg);
  write_trajectory(out_path, traj);
  log_info("rollout written to " + out_path);
  return 0;
}

int snapshot_index(const Trajectory& traj, double time) {
  const long idx = std::lround(time / traj.dt);
  if (idx < 0 || idx >= static_cast<long>(traj.states.size()))
    throw ConfigError("evaluation time " + std::to_string(time) + " outside trajectory");
  return static_cast<int>(idx);
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& truth_path,
                 const std::string& learned_path, const std::string& out_path, bool force) {
  const Trajectory truth = read_trajectory(truth_path);
  const Trajectory learned = read_trajectory(learned_path);
  if (truth.spec.dimension != learned.spec.dimension)
    throw ConfigError("dimension mismatch between trajectories");
  if (truth.dt != learned.dt) throw ConfigError("time grid mismatch between trajectories");
  const std::string hash = config_hash(cfg);
  if (!force) {
    for (const auto* t : {&truth, &learned})
      if (!t->config_hash.empty() && t->config_hash != hash)
        throw ConfigError("config hash mismatch (use --force to override)");
  }

  std::vector<double> times = cfg.eval.times;
  if (times.empty()) times = {truth.dt * truth.num_steps()};

  const int d = truth.spec.dimension;
  json per_time = json::array();
  const fs::path out(out_path);
  for (double t : times) {
    const auto& a = truth.states[snapshot_index(truth, t)].positions;
    const auto& b = learned.states[snapshot_index(learned, t)].positions;
    json entry{{"time", t}};
    if (d == 1) {
      // Shared grid spanning both sample sets.
      const double h_a = cfg.eval.bandwidth > 0 ? cfg.eval.bandwidth : silverman_bandwidth(a);
      const double lo = std::min(a.minCoeff(), b.minCoeff()) - 6.0 * h_a;
      const double hi = std::max(a.maxCoeff(), b.maxCoeff()) + 6.0 * h_a;
      const std::vector<Eigen::VectorXd> axes{
          Eigen::VectorXd::LinSpaced(cfg.eval.grid, lo, hi)};
      const DensityGrid da = gaussian_kde(a, h_a, axes);
      const DensityGrid db = gaussian_kde(b, h_a, axes);
      entry["kde_l2"] = l2_density_error(da, db);
      entry["bandwidth"] = h_a;
      std::vector<double> av(a.data(), a.data() + a.cols());
      std::vector<double> bv(b.data(), b.data() + b.cols());
      entry["w2"] = wasserstein_1d(av, bv, 2);
      // Density CSV for external plotting.
      char name[64];
      std::snprintf(name, sizeof(name), "density_t%g.csv", t);
      std::ofstream csv(out.parent_path() / name);
      csv << "x,truth,learned\n";
      for (int i = 0; i < axes[0].size(); ++i)
        csv << axes[0](i) << ',' << da.values(i) << ',' << db.values(i) << '\n';
    } else {
      entry["sliced_w2"] = sliced_wasserstein(a, b, cfg.eval.n_proj, cfg.seed);
      entry["n_proj"] = cfg.eval.n_proj;
    }
    per_time.push_back(entry);
  }

  // Record file names, not absolute paths, so reports from identical inputs
  // in different directories are bit-identical.
  json report{{"config_hash", hash},
              {"truth", fs::path(truth_path).filename().string()},
              {"learned", fs::path(learned_path).filename().string()},
              {"per_time", per_time}};
  std::ofstream rep(out_path);
  rep << report.dump(2) << '\n';
  log_info("report written to " + out_path);
  return 0;
}

int cmd_chaos(const ExperimentConfig& cfg, const std::string& checkpoint,
              const std::string& out_path, std::uint64_t seed, bool force) {
  const std::string ckpt_hash = checkpoint_config_hash(checkpoint);
  if (!force && !ckpt_hash.empty() && ckpt_hash != config_hash(cfg))
    throw ConfigError("config hash mismatch with checkpoint (use --force to override)");
  const MvnnModel model = read_mvnn_checkpoint(checkpoint);

  auto run = [&](int n, std::uint64_t rep_seed) {
    ExperimentConfig c = cfg;
    c.num_particles = n;
    const ParticleState init = make_initial(c, rep_seed);
    const Trajectory traj =
        mvnn_rollout(model, init, cfg.system.sigma, cfg.dt, cfg.num_steps, rep_seed);
    return traj.states.back().positions;
  };
  const auto rows =
      chaos_diagnostic(run, cfg.chaos.ladder, cfg.chaos.n_rep, seed, cfg.eval.n_proj);

  json table = json::array();
  for (const auto& row : rows)
    table.push_back({{"N", row.num_particles}, {"mean_w2", row.mean_w2}});
  json report{{"config_hash", config_hash(cfg)}, {"n_rep", cfg.chaos.n_rep},
              {"ladder", table}};
  std::ofstream rep(out_path);
  rep << report.dump(2) << '\n';
  log_info("chaos table written to " + out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field interacting-particle drift learning pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_path, data_dir, checkpoint, truth_path, learned_path,
      init_traj;
  std::uint64_t seed_flag = 0;
  bool seed_given = false, force = false;
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  int rollout_n = 0;

  app.add_option("--threads", threads, "worker thread cap");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config JSON")->required();
    sub->add_option("--out", out_path, "output path")->required();
    sub->add_flag("--force", force, "skip config hash checks");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { seed_flag = s; seed_given = true; },
        "override the config seed");
  };

  CLI::App* generate = app.add_subcommand("generate", "simulate ground-truth trajectories");
  add_common(generate);

  CLI::App* train = app.add_subcommand("train", "fit an MVNN drift to a dataset");
  add_common(train);
  train->add_option("--data", data_dir, "directory with manifest.json")->required();

  CLI::App* rollout = app.add_subcommand("rollout", "roll out a trained model");
  add_common(rollout);
  rollout->add_option("--checkpoint", checkpoint, "model checkpoint JSON")->required();
  rollout->add_option("--init-traj", init_traj,
                      "take the initial state from this trajectory file");
  rollout->add_option("--rollout-n", rollout_n, "particle count override");

  CLI::App* evaluate = app.add_subcommand("evaluate", "compare truth and learned rollouts");
  add_common(evaluate);
  evaluate->add_option("--truth", truth_path, "ground-truth trajectory")->required();
  evaluate->add_option("--learned", learned_path, "learned trajectory")->required();

  CLI::App* chaos = app.add_subcommand("chaos", "propagation-of-chaos ladder");
  add_common(chaos);
  chaos->add_option("--checkpoint", checkpoint, "model checkpoint JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = load_config(config_path);
    if (seed_given) cfg.seed = seed_flag;
    const std::uint64_t seed = cfg.seed;
    if (generate->parsed()) return cmd_generate(cfg, out_path, threads);
    if (train->parsed()) return cmd_train(cfg, data_dir, out_path, force, threads);
    if (rollout->parsed())
      return cmd_rollout(cfg, checkpoint, init_traj, rollout_n, out_path, seed, force);
    if (evaluate->parsed()) return cmd_evaluate(cfg, truth_path, learned_path, out_path, force);
    if (chaos->parsed()) return cmd_chaos(cfg, checkpoint, out_path, seed, force);
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: format: " << e.what() << "\n";
    return 2;
  } catch (const BlowupError& e) {
    std::cerr << "error: numeric: " << e.what() << "\n";
    return 3;
  } catch (const DivergedError& e) {
    std::cerr << "error: numeric: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
