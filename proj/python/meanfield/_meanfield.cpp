// Python bindings for the main operations: initial sampling, ground-truth
// simulation, drift evaluation, model training/rollout, and the evaluation
// metrics. Array layout matches the C++ core: states are (d, N).

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>
#include <optional>

#include "meanfield/config.hpp"
#include "meanfield/data.hpp"
#include "meanfield/errors.hpp"
#include "meanfield/rng.hpp"
#include "meanfield/dynamics.hpp"
#include "meanfield/io.hpp"
#include "meanfield/metrics.hpp"
#include "meanfield/mvnn.hpp"
#include "meanfield/train.hpp"

namespace py = pybind11;
using namespace meanfield;
using nlohmann::json;

namespace {

ParticleState make_state(const Eigen::MatrixXd& positions,
                         const std::optional<Eigen::MatrixXd>& velocities,
                         const std::vector<int>& group_sizes) {
  ParticleState st;
  st.positions = positions;
  if (velocities) st.velocities = *velocities;
  st.group_sizes = group_sizes;
  return st;
}

py::dict trajectory_to_dict(const Trajectory& traj) {
  py::dict out;
  out["dt"] = traj.dt;
  out["seed"] = traj.seed;
  out["config_hash"] = traj.config_hash;
  out["system"] = system_to_json(traj.spec).dump();
  py::list positions, velocities;
  for (const auto& st : traj.states) {
    positions.append(Eigen::MatrixXd(st.positions));
    if (st.velocities) velocities.append(Eigen::MatrixXd(*st.velocities));
  }
  out["positions"] = positions;
  if (traj.states.front().velocities) out["velocities"] = velocities;
  return out;
}

}  // namespace

PYBIND11_MODULE(_meanfield, m) {
  m.doc() = "interacting-particle simulation and measure-valued drift learning";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<FormatError>(m, "FormatError");
  py::register_exception<BlowupError>(m, "BlowupError");

  m.def(
      "sample_initial",
      [](const std::string& init_json, int n, std::uint64_t seed) {
        const InitSpec spec = init_from_json(json::parse(init_json));
        const ParticleState st = sample_initial(spec, n, seed);
        py::dict out;
        out["positions"] = Eigen::MatrixXd(st.positions);
        if (st.velocities) out["velocities"] = Eigen::MatrixXd(*st.velocities);
        return out;
      },
      py::arg("init_json"), py::arg("n"), py::arg("seed"));

  m.def(
      "simulate",
      [](const std::string& system_json, const Eigen::MatrixXd& positions,
         const std::optional<Eigen::MatrixXd>& velocities, long steps, double dt,
         std::uint64_t seed, std::uint64_t trajectory_index) {
        const SystemSpec spec = system_from_json(json::parse(system_json));
        std::vector<int> groups;
        if (spec.multigroup) groups = spec.multigroup->group_sizes;
        return trajectory_to_dict(simulate(
            spec, make_state(positions, velocities, groups), steps, dt, seed, trajectory_index));
      },
      py::arg("system_json"), py::arg("positions"), py::arg("velocities") = std::nullopt,
      py::arg("steps") = 100, py::arg("dt") = 0.01, py::arg("seed") = 0,
      py::arg("trajectory_index") = 0);

  m.def(
      "eval_drift",
      [](const std::string& system_json, const Eigen::MatrixXd& positions,
         const std::optional<Eigen::MatrixXd>& velocities) {
        const SystemSpec spec = system_from_json(json::parse(system_json));
        std::vector<int> groups;
        if (spec.multigroup) groups = spec.multigroup->group_sizes;
        return eval_drift(spec, make_state(positions, velocities, groups));
      },
      py::arg("system_json"), py::arg("positions"), py::arg("velocities") = std::nullopt);

  m.def(
      "fit",
      [](const std::string& config_json, const std::string& checkpoint_path) {
        const ExperimentConfig cfg = parse_config(config_json);
        std::vector<Trajectory> trajs;
        for (int mi = 0; mi < cfg.num_trajectories; ++mi) {
          const ParticleState init =
              sample_initial(cfg.init, cfg.num_particles, rng::mix(cfg.seed, 0x7241, mi));
          trajs.push_back(simulate(cfg.system, init, cfg.num_steps, cfg.dt, cfg.seed, mi));
        }
        auto [train, test] = build_dataset(trajs, cfg.train_count, cfg.test_count);
        MvnnModel model =
            make_mvnn(cfg.system.order, cfg.system.dimension, cfg.model, cfg.optim.seed);
        const TrainResult res =
            train_mvnn(model, train, test.snapshots.empty() ? nullptr : &test, cfg.optim);
        if (!checkpoint_path.empty())
          write_checkpoint(checkpoint_path, model, config_hash(cfg));
        py::dict out;
        out["final_train_loss"] = res.final_train_loss;
        out["test_mse"] = test.snapshots.empty() ? std::nan("") : dataset_mse(model, test);
        out["zero_predictor_mse"] = test.zero_predictor_mse();
        return out;
      },
      py::arg("config_json"), py::arg("checkpoint_path") = "");

  m.def(
      "mvnn_drift_all",
      [](const std::string& checkpoint_path, const Eigen::MatrixXd& positions,
         const std::optional<Eigen::MatrixXd>& velocities) {
        const MvnnModel model = read_mvnn_checkpoint(checkpoint_path);
        return mvnn_drift_all(model, make_state(positions, velocities, {}));
      },
      py::arg("checkpoint_path"), py::arg("positions"), py::arg("velocities") = std::nullopt);

  m.def(
      "rollout",
      [](const std::string& checkpoint_path, const Eigen::MatrixXd& positions,
         const std::optional<Eigen::MatrixXd>& velocities, double sigma, double dt,
         long steps, std::uint64_t seed) {
        const MvnnModel model = read_mvnn_checkpoint(checkpoint_path);
        return trajectory_to_dict(mvnn_rollout(
            model, make_state(positions, velocities, {}), sigma, dt, steps, seed));
      },
      py::arg("checkpoint_path"), py::arg("positions"), py::arg("velocities") = std::nullopt,
      py::arg("sigma") = 0.0, py::arg("dt") = 0.01, py::arg("steps") = 100,
      py::arg("seed") = 0);

  m.def("read_trajectory",
        [](const std::string& path) { return trajectory_to_dict(read_trajectory(path)); },
        py::arg("path"));

  m.def("silverman_bandwidth", &silverman_bandwidth, py::arg("samples"));
  m.def(
      "gaussian_kde",
      [](const Eigen::MatrixXd& samples, double bandwidth, int grid) {
        const DensityGrid g = gaussian_kde_auto_grid(samples, bandwidth, grid);
        py::dict out;
        py::list axes;
        for (const auto& ax : g.axes) axes.append(Eigen::VectorXd(ax));
        out["axes"] = axes;
        out["values"] = Eigen::VectorXd(g.values);
        out["mass"] = g.integral();
        return out;
      },
      py::arg("samples"), py::arg("bandwidth") = 0.0, py::arg("grid") = 256);
  m.def(
      "wasserstein_1d",
      [](const std::vector<double>& a, const std::vector<double>& b, int p) {
        return wasserstein_1d(a, b, p);
      },
      py::arg("a"), py::arg("b"), py::arg("p") = 2);
  m.def("sliced_wasserstein", &sliced_wasserstein, py::arg("a"), py::arg("b"),
        py::arg("n_proj") = 64, py::arg("seed") = 0, py::arg("p") = 2);
  m.def(
      "config_hash",
      [](const std::string& config_json) { return config_hash(parse_config(config_json)); },
      py::arg("config_json"));
}
