#ifndef MEANFIELD_DATA_HPP
#define MEANFIELD_DATA_HPP

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "meanfield/mvnn.hpp"
#include "meanfield/system.hpp"

namespace meanfield {

// --- initial-condition samplers ---

// 1D mixture of Gaussians: component count uniform in [min_components,
// max_components], means uniform in [mean_lo, mean_hi], fixed variance,
// symmetric Dirichlet(1) weights. Weights and means are drawn once per
// trajectory, then particles are assigned components independently.
struct GaussianMixtureInit {
  int min_components = 2;
  int max_components = 8;
  double mean_lo = 0.0;
  double mean_hi = 3.0;
  double variance = 0.25;
};

// 2D noisy annulus sampled in polar coordinates.
struct AnnulusInit {
  double radius = 1.5;      // R0
  double width = 0.5;       // W
  double noise = 0.05;      // sigma_0
  double center_x = 0.0;
  double center_y = 0.0;
};

// Two annuli, half the particles each (first half from `first`).
struct DoubleAnnulusInit {
  AnnulusInit first;
  AnnulusInit second;
};

// Uniform-by-area disk.
struct DiskInit {
  double radius = 1.0;
  double center_x = 0.0;
  double center_y = 0.0;
};

// Low-density box on the left, high-density box on the right.
struct BinaryAsymmetricInit {
  double left_fraction = 0.25;
  double left_lo_x = -2.0, left_hi_x = -0.5;
  double left_lo_y = -1.0, left_hi_y = 1.0;
  double right_lo_x = 0.5, right_hi_x = 2.0;
  double right_lo_y = -1.0, right_hi_y = 1.0;
};

// Isotropic Gaussian with a per-trajectory random scale s ~ U(s_min, s_max):
// X ~ N(mean, (s * sigma)^2 I).
struct ScaledGaussianInit {
  std::vector<double> mean;  // length = dimension
  double sigma = 1.0;
  double s_min = 0.5;
  double s_max = 2.0;
};

// Two scaled Gaussians, half the particles each, independent scales.
struct ScaledGaussianMixture2Init {
  ScaledGaussianInit first;
  ScaledGaussianInit second;
};

struct VelocityInit {
  double variance = 0.25;  // N(0, variance * I)
};

struct InitSpec {
  std::variant<GaussianMixtureInit, AnnulusInit, DoubleAnnulusInit, DiskInit,
               BinaryAsymmetricInit, ScaledGaussianInit, ScaledGaussianMixture2Init>
      position;
  std::optional<VelocityInit> velocity;

  int dimension() const;
};

ParticleState sample_initial(const InitSpec& spec, int num_particles, std::uint64_t seed);

// --- dataset assembly ---

struct Snapshot {
  int trajectory = 0;  // m
  int time_index = 0;  // l
  ParticleState state;
  Eigen::MatrixXd targets;  // d x N finite-difference velocities/accelerations
};

struct Dataset {
  Order order = Order::kFirst;
  int dimension = 1;
  std::vector<int> group_sizes;  // empty for single-group data
  std::vector<Snapshot> snapshots;

  long num_samples() const;
  // Mean squared norm of all targets; the zero-predictor baseline MSE.
  double zero_predictor_mse() const;
};

// V^i_l = (X_{l+1} - X_l) / dt for first-order trajectories, and
// A^i_l = (V_{l+1} - V_l) / dt for second-order; snapshot L has no target.
std::vector<Eigen::MatrixXd> finite_difference_targets(const Trajectory& traj);

// Nonuniform-spacing variant used by the same formula with explicit times.
std::vector<Eigen::MatrixXd> finite_difference_targets(const Trajectory& traj,
                                                       const std::vector<double>& times);

// Deterministic split by trajectory index: the first train_count trajectories
// train, the next test_count test.
std::pair<Dataset, Dataset> build_dataset(const std::vector<Trajectory>& trajectories,
                                          int train_count, int test_count);

// Sample-level minibatches: shuffles (snapshot, particle) pairs with the
// epoch seed; each batch references whole snapshots but selects only the
// sampled targets.
std::vector<DriftBatch> minibatch_iter(const Dataset& dataset, int batch_size,
                                       std::uint64_t epoch_seed);

// Snapshot-level batches: each batch holds whole snapshots, shuffled per
// epoch. The default for training, where the embedding cost is per snapshot.
std::vector<DriftBatch> snapshot_batches(const Dataset& dataset, int snapshots_per_batch,
                                         std::uint64_t epoch_seed);

// Multigroup view of a snapshot batch.
MgDriftBatch to_mg_batch(const Dataset& dataset, const DriftBatch& batch);

}  // namespace meanfield

#endif
