#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "meanfield/config.hpp"
#include "meanfield/data.hpp"
#include "meanfield/dynamics.hpp"
#include "meanfield/errors.hpp"
#include "meanfield/io.hpp"
#include "meanfield/train.hpp"

using namespace meanfield;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

const char* kMinimalConfig = R"({
  "system": {"order": 1, "dimension": 1, "drift_form": "motsch_tadmor",
             "kernel": {"type": "gaussian", "length": 0.5}, "sigma": 0.0},
  "init": {"type": "gaussian_mixture"},
  "N": 32, "M": 4, "L": 10, "dt": 0.01,
  "split": {"train": 3, "test": 1},
  "seed": 7
})";

}  // namespace

TEST_CASE("gaussian mixture sampling is deterministic and in range") {
  InitSpec spec{GaussianMixtureInit{}, {}};
  const ParticleState a = sample_initial(spec, 256, 5);
  const ParticleState b = sample_initial(spec, 256, 5);
  const ParticleState c = sample_initial(spec, 256, 6);
  CHECK(a.positions == b.positions);
  CHECK(a.positions != c.positions);
  CHECK(a.positions.rows() == 1);
  CHECK(a.positions.cols() == 256);
  // Means live in [0, 3] and the component sd is 0.5, so 5 sigma covers it.
  CHECK(a.positions.minCoeff() > 0.0 - 2.5);
  CHECK(a.positions.maxCoeff() < 3.0 + 2.5);
  CHECK_FALSE(a.velocities.has_value());
}

TEST_CASE("prefix stability: the first particles do not depend on N") {
  InitSpec spec{GaussianMixtureInit{}, {}};
  const ParticleState small = sample_initial(spec, 16, 3);
  const ParticleState big = sample_initial(spec, 64, 3);
  CHECK(small.positions == big.positions.leftCols(16));
}

TEST_CASE("annulus samples live near the ring") {
  AnnulusInit a;
  InitSpec spec{a, {}};
  const ParticleState st = sample_initial(spec, 512, 11);
  CHECK(st.positions.rows() == 2);
  for (int i = 0; i < st.num_particles(); ++i) {
    const double r = st.positions.col(i).norm();
    CHECK(r > a.radius - a.width / 2.0 - 5.0 * a.noise);
    CHECK(r < a.radius + a.width / 2.0 + 5.0 * a.noise);
  }
}

TEST_CASE("disk samples stay inside and fill by area") {
  DiskInit d{2.0, 1.0, -1.0};
  InitSpec spec{d, {}};
  const ParticleState st = sample_initial(spec, 2000, 13);
  int inner = 0;
  for (int i = 0; i < st.num_particles(); ++i) {
    const double r = std::hypot(st.positions(0, i) - 1.0, st.positions(1, i) + 1.0);
    CHECK(r <= 2.0);
    if (r <= 2.0 / std::sqrt(2.0)) ++inner;
  }
  // Half the area lies within R/sqrt(2).
  CHECK(std::abs(inner / 2000.0 - 0.5) < 0.05);
}

TEST_CASE("binary asymmetric split matches the left fraction") {
  BinaryAsymmetricInit b;
  InitSpec spec{b, {}};
  const ParticleState st = sample_initial(spec, 400, 17);
  int left = 0;
  for (int i = 0; i < st.num_particles(); ++i) {
    const double x = st.positions(0, i);
    const bool in_left = x >= b.left_lo_x && x <= b.left_hi_x;
    const bool in_right = x >= b.right_lo_x && x <= b.right_hi_x;
    CHECK((in_left || in_right));
    if (in_left) ++left;
  }
  CHECK(left == 100);
}

TEST_CASE("scaled gaussian uses one scale per trajectory") {
  ScaledGaussianInit g{{0.0, 0.0}, 1.0, 0.5, 2.0};
  InitSpec spec{g, {}};
  const ParticleState a = sample_initial(spec, 4000, 19);
  const ParticleState b = sample_initial(spec, 4000, 20);
  auto sd = [](const ParticleState& st) {
    return std::sqrt(st.positions.row(0).squaredNorm() / st.positions.cols());
  };
  CHECK(sd(a) > 0.4);
  CHECK(sd(a) < 2.3);
  CHECK(std::abs(sd(a) - sd(b)) > 1e-3);  // different trajectory scales
}

TEST_CASE("velocity init attaches second-order state") {
  InitSpec spec{GaussianMixtureInit{}, VelocityInit{0.25}};
  const ParticleState st = sample_initial(spec, 5000, 23);
  REQUIRE(st.velocities.has_value());
  const double second_moment = st.velocities->squaredNorm() / 5000.0;
  CHECK(std::abs(second_moment - 0.25) < 0.02);
}

TEST_CASE("finite differences invert a noiseless Euler step exactly") {
  SystemSpec spec{Order::kFirst, 1, DriftForm::kPairwisePosition, GaussianKernel{0.5}};
  InitSpec init{GaussianMixtureInit{}, {}};
  const Trajectory traj = simulate(spec, sample_initial(init, 24, 2), 20, 0.01, 3);
  const auto targets = finite_difference_targets(traj);
  REQUIRE(static_cast<int>(targets.size()) == 20);
  for (int l = 0; l < 20; ++l) {
    const Eigen::MatrixXd drift = pairwise_drift(traj.states[l], spec.kernel);
    CHECK((targets[l] - drift).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("explicit-times finite differences handle nonuniform spacing") {
  Trajectory traj;
  traj.spec = SystemSpec{Order::kFirst, 1, DriftForm::kPairwisePosition, GaussianKernel{0.5}};
  traj.dt = 1.0;
  for (int l = 0; l < 3; ++l) {
    ParticleState st;
    st.positions = Eigen::MatrixXd::Constant(1, 2, static_cast<double>(l * l));
    traj.states.push_back(st);
  }
  const auto targets = finite_difference_targets(traj, {0.0, 0.5, 2.0});
  CHECK(targets[0](0, 0) == doctest::Approx(2.0));         // (1-0)/0.5
  CHECK(targets[1](0, 0) == doctest::Approx(2.0));         // (4-1)/1.5
  CHECK_THROWS_AS(finite_difference_targets(traj, {0.0, 0.5}), ShapeError);
  CHECK_THROWS_AS(finite_difference_targets(traj, {0.0, 0.5, 0.5}), ConfigError);
}

TEST_CASE("build_dataset splits by trajectory index") {
  SystemSpec spec{Order::kFirst, 1, DriftForm::kPairwisePosition, GaussianKernel{0.5}};
  InitSpec init{GaussianMixtureInit{}, {}};
  std::vector<Trajectory> trajs;
  for (int m = 0; m < 4; ++m)
    trajs.push_back(simulate(spec, sample_initial(init, 8, 100 + m), 5, 0.01, 9, m));

  const auto [train, test] = build_dataset(trajs, 3, 1);
  CHECK(train.snapshots.size() == 15);
  CHECK(test.snapshots.size() == 5);
  CHECK(train.num_samples() == 15 * 8);
  for (const auto& s : train.snapshots) CHECK(s.trajectory < 3);
  for (const auto& s : test.snapshots) CHECK(s.trajectory == 3);
  CHECK_THROWS_AS(build_dataset(trajs, 2, 1), ConfigError);

  double acc = 0.0;
  long cnt = 0;
  for (const auto& s : train.snapshots) {
    acc += s.targets.squaredNorm();
    cnt += 8;
  }
  CHECK(train.zero_predictor_mse() == doctest::Approx(acc / cnt).epsilon(1e-13));
}

TEST_CASE("minibatch_iter covers every sample exactly once") {
  SystemSpec spec{Order::kFirst, 1, DriftForm::kPairwisePosition, GaussianKernel{0.5}};
  InitSpec init{GaussianMixtureInit{}, {}};
  const Trajectory traj = simulate(spec, sample_initial(init, 7, 1), 6, 0.01, 5);
  const auto [train, test] = build_dataset({traj}, 1, 0);

  const auto batches = minibatch_iter(train, 10, 77);
  long total = 0;
  std::set<std::pair<const void*, int>> seen;
  for (const auto& b : batches) {
    CHECK(b.num_samples() <= 10);
    total += b.num_samples();
    for (const auto& ref : b.snapshots)
      for (int i : ref.sample_indices) CHECK(seen.insert({ref.state, i}).second);
  }
  CHECK(total == train.num_samples());
  for (std::size_t i = 0; i + 1 < batches.size(); ++i)
    CHECK(batches[i].num_samples() == 10);

  // Deterministic per epoch seed; different seeds reshuffle.
  const auto again = minibatch_iter(train, 10, 77);
  CHECK(again.front().snapshots.front().sample_indices ==
        batches.front().snapshots.front().sample_indices);
}

TEST_CASE("snapshot_batches partition whole snapshots") {
  SystemSpec spec{Order::kFirst, 1, DriftForm::kPairwisePosition, GaussianKernel{0.5}};
  InitSpec init{GaussianMixtureInit{}, {}};
  const Trajectory traj = simulate(spec, sample_initial(init, 5, 1), 9, 0.01, 5);
  const auto [train, test] = build_dataset({traj}, 1, 0);

  const auto batches = snapshot_batches(train, 4, 3);
  CHECK(batches.size() == 3);
  long total = 0;
  for (const auto& b : batches) {
    for (const auto& ref : b.snapshots)
      CHECK(static_cast<int>(ref.sample_indices.size()) == ref.state->num_particles());
    total += b.num_samples();
  }
  CHECK(total == train.num_samples());
}

TEST_CASE("to_mg_batch maps global indices to group-local ones") {
  Dataset ds;
  ds.group_sizes = {3, 2};
  Snapshot snap;
  snap.state.positions = Eigen::MatrixXd::Random(1, 5);
  snap.state.group_sizes = ds.group_sizes;
  snap.targets = Eigen::MatrixXd::Random(1, 5);
  ds.snapshots.push_back(snap);

  DriftBatch batch;
  batch.snapshots.push_back(
      {&ds.snapshots[0].state, &ds.snapshots[0].targets, {0, 2, 3, 4}});
  const MgDriftBatch mg = to_mg_batch(ds, batch);
  CHECK(mg.snapshots[0].sample_indices[0] == std::vector<int>{0, 2});
  CHECK(mg.snapshots[0].sample_indices[1] == std::vector<int>{0, 1});
  CHECK(mg.num_samples() == 4);
}

TEST_CASE("trajectory round-trip is bit exact") {
  SystemSpec spec{Order::kFirst, 1, DriftForm::kMotschTadmor, GaussianKernel{0.5}, 0.1};
  InitSpec init{GaussianMixtureInit{}, {}};
  Trajectory traj = simulate(spec, sample_initial(init, 12, 4), 8, 0.01, 21, 2);
  traj.config_hash = "deadbeefdeadbeef";

  const std::string path = temp_path("roundtrip_first.mvnt");
  write_trajectory(path, traj);
  const Trajectory back = read_trajectory(path);
  CHECK(back.dt == traj.dt);
  CHECK(back.seed == traj.seed);
  CHECK(back.config_hash == traj.config_hash);
  CHECK(back.spec.dimension == 1);
  CHECK(back.spec.drift_form == DriftForm::kMotschTadmor);
  REQUIRE(back.states.size() == traj.states.size());
  for (std::size_t l = 0; l < traj.states.size(); ++l)
    CHECK(back.states[l].positions == traj.states[l].positions);

  // Rewriting the parsed trajectory reproduces the same bytes.
  const std::string path2 = temp_path("roundtrip_first_2.mvnt");
  write_trajectory(path2, back);
  CHECK(read_bytes(path) == read_bytes(path2));
}

TEST_CASE("second-order and multigroup trajectories round-trip") {
  SystemSpec cs{Order::kSecond, 2, DriftForm::kCuckerSmale, AttractionRepulsionKernel{}};
  InitSpec init{DiskInit{}, VelocityInit{0.25}};
  const Trajectory traj = simulate(cs, sample_initial(init, 10, 6), 5, 0.01, 33);
  const std::string path = temp_path("roundtrip_second.mvnt");
  write_trajectory(path, traj);
  const Trajectory back = read_trajectory(path);
  REQUIRE(back.states.front().velocities.has_value());
  for (std::size_t l = 0; l < traj.states.size(); ++l) {
    CHECK(back.states[l].positions == traj.states[l].positions);
    CHECK(*back.states[l].velocities == *traj.states[l].velocities);
  }

  MultigroupSpec mg;
  mg.group_sizes = {4, 3};
  mg.influence.resize(2, 2);
  mg.influence << 5.0, 10.0, 0.0, 2.0;
  mg.radii = {1.0, 2.5};
  SystemSpec mspec{Order::kFirst, 1, DriftForm::kMultigroup, GaussianKernel{0.5}, 0.0, mg};
  InitSpec minit{GaussianMixtureInit{}, {}};
  ParticleState ms = sample_initial(minit, 7, 8);
  ms.group_sizes = mg.group_sizes;
  const Trajectory mtraj = simulate(mspec, ms, 4, 0.01, 44);
  const std::string mpath = temp_path("roundtrip_mg.mvnt");
  write_trajectory(mpath, mtraj);
  const Trajectory mback = read_trajectory(mpath);
  CHECK(mback.spec.multigroup->group_sizes == mg.group_sizes);
  CHECK(mback.states.front().group_sizes == mg.group_sizes);
  CHECK(mback.states.back().positions == mtraj.states.back().positions);
}

TEST_CASE("malformed trajectory files raise FormatError") {
  const std::string path = temp_path("malformed.mvnt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "MVNTgarbage";
  }
  CHECK_THROWS_AS(read_trajectory(path), FormatError);
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS_AS(read_trajectory(path), FormatError);
  CHECK_THROWS_AS(read_trajectory(temp_path("does_not_exist.mvnt")), FormatError);
}

TEST_CASE("checkpoint round-trip preserves every parameter bit") {
  ModelConfig cfg;
  cfg.k = 5;
  const MvnnModel model = make_mvnn(Order::kSecond, 2, cfg, 55);
  const std::string path = temp_path("ckpt.json");
  write_checkpoint(path, model, "cafef00dcafef00d");
  CHECK(checkpoint_kind(path) == "mvnn2");
  CHECK(checkpoint_config_hash(path) == "cafef00dcafef00d");
  const MvnnModel back = read_mvnn_checkpoint(path);
  CHECK(back.order == model.order);
  CHECK(back.k == model.k);
  for (int l = 0; l < model.emb.num_layers(); ++l) {
    CHECK(back.emb.weights[l] == model.emb.weights[l]);
    CHECK(back.int_net.weights[l] == model.int_net.weights[l]);
    CHECK(back.emb.biases[l] == model.emb.biases[l]);
  }

  ModelConfig mg_cfg;
  mg_cfg.k = 3;
  mg_cfg.embed_dims = {3, 2};
  const MgMvnnModel mg = make_mg_mvnn(1, 2, mg_cfg, 56);
  const std::string mg_path = temp_path("ckpt_mg.json");
  write_checkpoint(mg_path, mg);
  CHECK(checkpoint_kind(mg_path) == "mg_mvnn");
  CHECK(checkpoint_config_hash(mg_path).empty());
  const MgMvnnModel mg_back = read_mg_checkpoint(mg_path);
  CHECK(mg_back.embed_dims == mg.embed_dims);
  for (int g = 0; g < 2; ++g)
    for (int l = 0; l < mg.emb[g].num_layers(); ++l) {
      CHECK(mg_back.emb[g].weights[l] == mg.emb[g].weights[l]);
      CHECK(mg_back.int_nets[g].weights[l] == mg.int_nets[g].weights[l]);
    }
  CHECK_THROWS_AS(read_mg_checkpoint(path), FormatError);
}

TEST_CASE("config parsing is strict about keys and values") {
  const ExperimentConfig cfg = parse_config(kMinimalConfig);
  CHECK(cfg.num_particles == 32);
  CHECK(cfg.train_count == 3);
  CHECK(cfg.seed == 7);
  CHECK(cfg.system.drift_form == DriftForm::kMotschTadmor);

  std::string bad = kMinimalConfig;
  bad.insert(bad.rfind('}'), ", \"typo_key\": 1");
  CHECK_THROWS_AS(parse_config(bad), ConfigError);

  std::string neg_sigma = kMinimalConfig;
  neg_sigma.replace(neg_sigma.find("\"sigma\": 0.0"), 12, "\"sigma\": -1.0");
  CHECK_THROWS_WITH_AS(parse_config(neg_sigma), "invalid sigma", ConfigError);

  std::string bad_split = kMinimalConfig;
  bad_split.replace(bad_split.find("\"train\": 3"), 10, "\"train\": 9");
  CHECK_THROWS_AS(parse_config(bad_split), ConfigError);
}

TEST_CASE("config hash is stable and sensitive") {
  const ExperimentConfig a = parse_config(kMinimalConfig);
  const ExperimentConfig b = parse_config(kMinimalConfig);
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  ExperimentConfig c = a;
  c.num_particles = 33;
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("training smoke run decreases the loss deterministically") {
  SystemSpec spec{Order::kFirst, 1, DriftForm::kPairwisePosition, GaussianKernel{0.5}};
  InitSpec init{GaussianMixtureInit{}, {}};
  std::vector<Trajectory> trajs;
  for (int m = 0; m < 3; ++m)
    trajs.push_back(simulate(spec, sample_initial(init, 16, 200 + m), 10, 0.01, 77, m));
  const auto [train, test] = build_dataset(trajs, 2, 1);

  ModelConfig mc;
  mc.k = 4;
  mc.emb_hidden = {8};
  mc.int_hidden = {8};
  OptimConfig oc;
  oc.epochs = 15;
  oc.lr = 3e-3;
  oc.seed = 1;

  MvnnModel model = make_mvnn(Order::kFirst, 1, mc, 2);
  const TrainResult res = train_mvnn(model, train, &test, oc);
  REQUIRE(static_cast<int>(res.log.size()) == 15);
  CHECK(res.log.back().train_loss < res.log.front().train_loss);
  CHECK(std::isfinite(res.log.back().test_loss));
  CHECK(dataset_mse(model, train) < 1.5 * res.final_train_loss + 1e-6);

  MvnnModel model2 = make_mvnn(Order::kFirst, 1, mc, 2);
  train_mvnn(model2, train, &test, oc);
  for (int l = 0; l < model.emb.num_layers(); ++l)
    CHECK(model.emb.weights[l] == model2.emb.weights[l]);
}
