#include "meanfield/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "meanfield/errors.hpp"
#include "meanfield/rng.hpp"

namespace meanfield {

namespace {

// Counter tags keep the draw streams of trajectory-level parameters,
// positions, and velocities disjoint.
constexpr std::uint64_t kTagTrajectory = 0;
constexpr std::uint64_t kTagPosition = 1;
constexpr std::uint64_t kTagVelocity = 2;

double uni(std::uint64_t seed, std::uint64_t tag, std::uint64_t i, std::uint64_t draw) {
  return rng::uniform(seed, tag, i, draw);
}

double nrm(std::uint64_t seed, std::uint64_t tag, std::uint64_t i, std::uint64_t draw) {
  return rng::normal(seed, tag, i, draw);
}

void sample_annulus(const AnnulusInit& a, std::uint64_t seed, int i, int draw_index,
                    double& x, double& y) {
  const double theta = 2.0 * std::numbers::pi * uni(seed, kTagPosition, draw_index, 0);
  const double rho =
      a.radius - a.width / 2.0 + a.width * uni(seed, kTagPosition, draw_index, 1);
  x = a.center_x + rho * std::cos(theta) + a.noise * nrm(seed, kTagPosition, i, 2);
  y = a.center_y + rho * std::sin(theta) + a.noise * nrm(seed, kTagPosition, i, 3);
}

void sample_scaled_gaussian(const ScaledGaussianInit& g, double scale, std::uint64_t seed,
                            int i, Eigen::Ref<Eigen::VectorXd> out) {
  for (int c = 0; c < static_cast<int>(g.mean.size()); ++c)
    out(c) = g.mean[c] + scale * g.sigma * nrm(seed, kTagPosition, i, c);
}

double draw_scale(const ScaledGaussianInit& g, std::uint64_t seed, std::uint64_t slot) {
  if (g.s_min <= 0.0 || g.s_max < g.s_min)
    throw ConfigError("scaled gaussian: need 0 < s_min <= s_max");
  return g.s_min + (g.s_max - g.s_min) * uni(seed, kTagTrajectory, slot, 0);
}

}  // namespace

int InitSpec::dimension() const {
  return std::visit(
      [](const auto& p) -> int {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianMixtureInit>) {
          return 1;
        } else if constexpr (std::is_same_v<T, ScaledGaussianInit>) {
          return static_cast<int>(p.mean.size());
        } else if constexpr (std::is_same_v<T, ScaledGaussianMixture2Init>) {
          return static_cast<int>(p.first.mean.size());
        } else {
          return 2;
        }
      },
      position);
}

ParticleState sample_initial(const InitSpec& spec, int num_particles, std::uint64_t seed) {
  if (num_particles < 1) throw ConfigError("sample_initial: need at least one particle");
  const int d = spec.dimension();
  if (d < 1) throw ConfigError("sample_initial: zero-dimensional init spec");
  ParticleState state;
  state.positions.resize(d, num_particles);

  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianMixtureInit>) {
          if (p.min_components < 1 || p.max_components < p.min_components)
            throw ConfigError("gaussian mixture: bad component range");
          if (p.variance <= 0.0) throw ConfigError("gaussian mixture: variance must be > 0");
          const int span = p.max_components - p.min_components + 1;
          const int c = p.min_components +
                        static_cast<int>(uni(seed, kTagTrajectory, 0, 0) * span) % span;
          std::vector<double> means(c), weights(c);
          double wsum = 0.0;
          for (int j = 0; j < c; ++j) {
            means[j] = p.mean_lo + (p.mean_hi - p.mean_lo) * uni(seed, kTagTrajectory, 1, j);
            // Dirichlet(1,...,1) via normalized Exp(1) draws.
            weights[j] = -std::log(uni(seed, kTagTrajectory, 2, j));
            wsum += weights[j];
          }
          for (double& w : weights) w /= wsum;
          const double sd = std::sqrt(p.variance);
          for (int i = 0; i < num_particles; ++i) {
            const double u = uni(seed, kTagPosition, i, 0);
            double cum = 0.0;
            int pick = c - 1;
            for (int j = 0; j < c; ++j) {
              cum += weights[j];
              if (u <= cum) {
                pick = j;
                break;
              }
            }
            state.positions(0, i) = means[pick] + sd * nrm(seed, kTagPosition, i, 1);
          }
        } else if constexpr (std::is_same_v<T, AnnulusInit>) {
          for (int i = 0; i < num_particles; ++i)
            sample_annulus(p, seed, i, i, state.positions(0, i), state.positions(1, i));
        } else if constexpr (std::is_same_v<T, DoubleAnnulusInit>) {
          // The second half reuses the first half's polar draws, shifted to
          // the second annulus center.
          const int half = num_particles / 2;
          for (int i = 0; i < num_particles; ++i) {
            const auto& a = i < half ? p.first : p.second;
            const int draw = i < half ? i : i - half;
            sample_annulus(a, seed, i, draw, state.positions(0, i), state.positions(1, i));
          }
        } else if constexpr (std::is_same_v<T, DiskInit>) {
          if (p.radius <= 0.0) throw ConfigError("disk: radius must be > 0");
          for (int i = 0; i < num_particles; ++i) {
            const double r = p.radius * std::sqrt(uni(seed, kTagPosition, i, 0));
            const double theta = 2.0 * std::numbers::pi * uni(seed, kTagPosition, i, 1);
            state.positions(0, i) = p.center_x + r * std::cos(theta);
            state.positions(1, i) = p.center_y + r * std::sin(theta);
          }
        } else if constexpr (std::is_same_v<T, BinaryAsymmetricInit>) {
          if (p.left_fraction < 0.0 || p.left_fraction > 1.0)
            throw ConfigError("binary asymmetric: left fraction must be in [0,1]");
          const int n_left = static_cast<int>(std::lround(p.left_fraction * num_particles));
          for (int i = 0; i < num_particles; ++i) {
            const bool left = i < n_left;
            const double lo_x = left ? p.left_lo_x : p.right_lo_x;
            const double hi_x = left ? p.left_hi_x : p.right_hi_x;
            const double lo_y = left ? p.left_lo_y : p.right_lo_y;
            const double hi_y = left ? p.left_hi_y : p.right_hi_y;
            state.positions(0, i) = lo_x + (hi_x - lo_x) * uni(seed, kTagPosition, i, 0);
            state.positions(1, i) = lo_y + (hi_y - lo_y) * uni(seed, kTagPosition, i, 1);
          }
        } else if constexpr (std::is_same_v<T, ScaledGaussianInit>) {
          const double s = draw_scale(p, seed, 0);
          for (int i = 0; i < num_particles; ++i)
            sample_scaled_gaussian(p, s, seed, i, state.positions.col(i));
        } else if constexpr (std::is_same_v<T, ScaledGaussianMixture2Init>) {
          if (p.first.mean.size() != p.second.mean.size())
            throw ConfigError("scaled gaussian mixture: component dims differ");
          const double s1 = draw_scale(p.first, seed, 0);
          const double s2 = draw_scale(p.second, seed, 1);
          const int half = num_particles / 2;
          for (int i = 0; i < num_particles; ++i) {
            if (i < half)
              sample_scaled_gaussian(p.first, s1, seed, i, state.positions.col(i));
            else
              sample_scaled_gaussian(p.second, s2, seed, i, state.positions.col(i));
          }
        }
      },
      spec.position);

  if (spec.velocity) {
    if (spec.velocity->variance < 0.0)
      throw ConfigError("velocity init: variance must be >= 0");
    const double sd = std::sqrt(spec.velocity->variance);
    Eigen::MatrixXd vel(d, num_particles);
    for (int i = 0; i < num_particles; ++i)
      for (int c = 0; c < d; ++c) vel(c, i) = sd * nrm(seed, kTagVelocity, i, c);
    state.velocities = std::move(vel);
  }
  return state;
}

long Dataset::num_samples() const {
  long n = 0;
  for (const auto& s : snapshots) n += s.state.num_particles();
  return n;
}

double Dataset::zero_predictor_mse() const {
  double total = 0.0;
  long count = 0;
  for (const auto& s : snapshots) {
    total += s.targets.squaredNorm();
    count += s.state.num_particles();
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

std::vector<Eigen::MatrixXd> finite_difference_targets(const Trajectory& traj) {
  std::vector<double> times(traj.states.size());
  for (std::size_t l = 0; l < times.size(); ++l) times[l] = traj.dt * static_cast<double>(l);
  return finite_difference_targets(traj, times);
}

std::vector<Eigen::MatrixXd> finite_difference_targets(const Trajectory& traj,
                                                       const std::vector<double>& times) {
  const int num_steps = traj.num_steps();
  if (num_steps < 1) throw ConfigError("finite_difference_targets: trajectory has no steps");
  if (times.size() != traj.states.size())
    throw ShapeError("finite_difference_targets: times do not match snapshots");
  const bool second = traj.spec.order == Order::kSecond;
  std::vector<Eigen::MatrixXd> targets;
  targets.reserve(num_steps);
  for (int l = 0; l < num_steps; ++l) {
    const double dt = times[l + 1] - times[l];
    if (dt <= 0.0) throw ConfigError("finite_difference_targets: times must increase");
    if (second)
      targets.push_back((*traj.states[l + 1].velocities - *traj.states[l].velocities) / dt);
    else
      targets.push_back((traj.states[l + 1].positions - traj.states[l].positions) / dt);
  }
  return targets;
}

std::pair<Dataset, Dataset> build_dataset(const std::vector<Trajectory>& trajectories,
                                          int train_count, int test_count) {
  if (train_count < 0 || test_count < 0 ||
      train_count + test_count != static_cast<int>(trajectories.size()))
    throw ConfigError("build_dataset: split counts must sum to trajectory count");
  Dataset train, test;
  if (!trajectories.empty()) {
    const auto& first = trajectories.front();
    for (Dataset* ds : {&train, &test}) {
      ds->order = first.spec.order;
      ds->dimension = first.spec.dimension;
      if (first.spec.multigroup) ds->group_sizes = first.spec.multigroup->group_sizes;
    }
  }
  for (int m = 0; m < static_cast<int>(trajectories.size()); ++m) {
    const auto& traj = trajectories[m];
    auto targets = finite_difference_targets(traj);
    Dataset& ds = m < train_count ? train : test;
    for (int l = 0; l < traj.num_steps(); ++l)
      ds.snapshots.push_back({m, l, traj.states[l], std::move(targets[l])});
  }
  return {std::move(train), std::move(test)};
}

std::vector<DriftBatch> minibatch_iter(const Dataset& dataset, int batch_size,
                                       std::uint64_t epoch_seed) {
  if (batch_size < 1) throw ConfigError("minibatch_iter: batch size must be >= 1");
  std::vector<std::pair<int, int>> samples;  // (snapshot index, particle index)
  samples.reserve(dataset.num_samples());
  for (int s = 0; s < static_cast<int>(dataset.snapshots.size()); ++s)
    for (int i = 0; i < dataset.snapshots[s].state.num_particles(); ++i)
      samples.emplace_back(s, i);
  rng::Stream stream(epoch_seed);
  std::shuffle(samples.begin(), samples.end(), stream);

  std::vector<DriftBatch> batches;
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    const std::size_t end = std::min(samples.size(), begin + batch_size);
    DriftBatch batch;
    std::unordered_map<int, std::size_t> snap_slot;
    for (std::size_t s = begin; s < end; ++s) {
      const auto [snap, particle] = samples[s];
      auto [it, inserted] = snap_slot.try_emplace(snap, batch.snapshots.size());
      if (inserted) {
        batch.snapshots.push_back(
            {&dataset.snapshots[snap].state, &dataset.snapshots[snap].targets, {}});
      }
      batch.snapshots[it->second].sample_indices.push_back(particle);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<DriftBatch> snapshot_batches(const Dataset& dataset, int snapshots_per_batch,
                                         std::uint64_t epoch_seed) {
  if (snapshots_per_batch < 1)
    throw ConfigError("snapshot_batches: batch size must be >= 1");
  std::vector<int> order(dataset.snapshots.size());
  std::iota(order.begin(), order.end(), 0);
  rng::Stream stream(epoch_seed);
  std::shuffle(order.begin(), order.end(), stream);

  std::vector<DriftBatch> batches;
  for (std::size_t begin = 0; begin < order.size(); begin += snapshots_per_batch) {
    const std::size_t end = std::min(order.size(), begin + snapshots_per_batch);
    DriftBatch batch;
    for (std::size_t s = begin; s < end; ++s) {
      const auto& snap = dataset.snapshots[order[s]];
      SnapshotRef ref{&snap.state, &snap.targets, {}};
      ref.sample_indices.resize(snap.state.num_particles());
      std::iota(ref.sample_indices.begin(), ref.sample_indices.end(), 0);
      batch.snapshots.push_back(std::move(ref));
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

MgDriftBatch to_mg_batch(const Dataset& dataset, const DriftBatch& batch) {
  if (dataset.group_sizes.empty())
    throw ConfigError("to_mg_batch: dataset has no group structure");
  MgDriftBatch mg;
  mg.group_sizes = dataset.group_sizes;
  std::vector<int> offsets(mg.group_sizes.size() + 1, 0);
  for (std::size_t g = 0; g < mg.group_sizes.size(); ++g)
    offsets[g + 1] = offsets[g] + mg.group_sizes[g];
  for (const auto& ref : batch.snapshots) {
    MgSnapshotRef mref;
    mref.state = ref.state;
    mref.targets = ref.targets;
    mref.sample_indices.resize(mg.group_sizes.size());
    for (int i : ref.sample_indices) {
      const auto it = std::upper_bound(offsets.begin(), offsets.end(), i);
      const int g = static_cast<int>(it - offsets.begin()) - 1;
      mref.sample_indices[g].push_back(i - offsets[g]);
    }
    mg.snapshots.push_back(std::move(mref));
  }
  return mg;
}

}  // namespace meanfield
