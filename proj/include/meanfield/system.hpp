#ifndef MEANFIELD_SYSTEM_HPP
#define MEANFIELD_SYSTEM_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace meanfield {

// --- interaction kernels ---

struct GaussianKernel {
  double length = 0.5;  // phi(r) = exp(-(r/length)^2)
};

struct AttractionRepulsionKernel {
  double c_rep = 1.0;
  double l_rep = 0.5;
  double c_att = 0.7;
  double l_att = 2.0;
};

// D * exp(1 - 1/(1 - (r/R)^p)) on r < R, 0 outside (0 at r = R).
struct CompactBumpKernel {
  double strength = 1.0;  // D
  double radius = 1.0;    // R
  int exponent = 10;      // p, even positive
};

using KernelSpec = std::variant<GaussianKernel, AttractionRepulsionKernel, CompactBumpKernel>;

double eval_kernel(const KernelSpec& spec, double r);

// --- system description ---

enum class Order { kFirst = 1, kSecond = 2 };

enum class DriftForm {
  kPairwisePosition,
  kMotschTadmor,
  kCuckerSmale,
  kMultigroup,
  kLearned,  // trajectory produced by a rolled-out model
};

struct MultigroupSpec {
  std::vector<int> group_sizes;            // N_1..N_K
  Eigen::MatrixXd influence;               // D, K x K
  std::vector<double> radii;               // R_l, per source group
  int exponent = 10;
  double sign = 1.0;                       // +1 per the printed dynamics; -1 flips to attraction
};

struct SystemSpec {
  Order order = Order::kFirst;
  int dimension = 1;
  DriftForm drift_form = DriftForm::kPairwisePosition;
  KernelSpec kernel = GaussianKernel{};
  double sigma = 0.0;
  std::optional<MultigroupSpec> multigroup;

  void validate() const;
};

// --- particle states and trajectories ---

// Positions (and velocities for second-order systems) stored d x N,
// one particle per column. For multigroup systems group_sizes records
// the contiguous group blocks.
struct ParticleState {
  Eigen::MatrixXd positions;
  std::optional<Eigen::MatrixXd> velocities;
  std::vector<int> group_sizes;

  int num_particles() const { return static_cast<int>(positions.cols()); }
  int dim() const { return static_cast<int>(positions.rows()); }
  bool all_finite() const {
    return positions.allFinite() && (!velocities || velocities->allFinite());
  }
};

struct Trajectory {
  SystemSpec spec;
  double dt = 0.0;
  std::vector<ParticleState> states;  // L+1 snapshots
  std::uint64_t seed = 0;
  std::string config_hash;  // provenance tag carried through the file header

  int num_steps() const { return static_cast<int>(states.size()) - 1; }
};

}  // namespace meanfield

#endif
