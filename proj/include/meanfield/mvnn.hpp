#ifndef MEANFIELD_MVNN_HPP
#define MEANFIELD_MVNN_HPP

#include <cstdint>
#include <vector>

#include "meanfield/mlp.hpp"
#include "meanfield/system.hpp"

namespace meanfield {

// Measure-valued neural drift b(x, mu) = int_net(x, <emb, mu>). For
// second-order systems the embedding consumes (x, v) pairs and the
// interaction net consumes (x, v, z).
struct MvnnModel {
  Order order = Order::kFirst;
  int d = 1;
  int k = 1;
  MlpParams emb;      // R^{d or 2d} -> R^k
  MlpParams int_net;  // R^{(d or 2d) + k} -> R^d

  int state_dim() const { return order == Order::kFirst ? d : 2 * d; }
  void validate() const;
};

// One interaction net per group; every interaction net sees the
// concatenation of all group embedding means (group order 1..K).
struct MgMvnnModel {
  int d = 1;
  std::vector<int> embed_dims;      // r_l per group
  std::vector<MlpParams> emb;       // per group
  std::vector<MlpParams> int_nets;  // per group, input d + sum(r_l)

  int num_groups() const { return static_cast<int>(emb.size()); }
  int total_embed_dim() const;
  void validate() const;
};

// Minibatch of regression samples. Samples reference whole snapshots so the
// embedding mean is computed once per snapshot from all of its particles.
struct SnapshotRef {
  const ParticleState* state = nullptr;
  const Eigen::MatrixXd* targets = nullptr;  // d x N (full snapshot targets)
  std::vector<int> sample_indices;  // particles whose loss terms are in the batch
};

struct DriftBatch {
  std::vector<SnapshotRef> snapshots;
  long num_samples() const;
};

// z = (1/N) sum_j emb(X^j) (second-order: emb(X^j, V^j)), fixed particle order.
Eigen::VectorXd embed_mean(const MvnnModel& model, const ParticleState& particles);

// Drift at one state given a precomputed embedding mean.
Eigen::VectorXd mvnn_drift(const MvnnModel& model, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& z);

// Second-order variant: acceleration at (x, v).
Eigen::VectorXd second_order_drift(const MvnnModel& model, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& v, const Eigen::VectorXd& z);

// All-particle drift: one embedding pass then one interaction pass per
// particle, O(N) total.
Eigen::MatrixXd mvnn_drift_all(const MvnnModel& model, const ParticleState& particles);

// Mean squared residual over the batch samples plus exact gradients. The
// embedding gradient flows through the snapshot mean, i.e. aggregates over
// all N particles of each snapshot.
struct MvnnLossGrad {
  double loss = 0.0;
  MlpGrads emb_grads;
  MlpGrads int_grads;
};

// Snapshot contributions are independent; with threads > 1 they are computed
// in parallel and reduced in snapshot order, so the result is deterministic
// for a fixed thread count.
MvnnLossGrad mvnn_loss_grad(const MvnnModel& model, const DriftBatch& batch,
                            int threads = 1);

// Multi-group batch: one DriftBatch worth of samples per group, all sharing
// the same snapshot states (group blocks are slices of the state).
struct MgSnapshotRef {
  const ParticleState* state = nullptr;             // full multigroup state
  const Eigen::MatrixXd* targets = nullptr;         // d x N over all groups
  std::vector<std::vector<int>> sample_indices;     // per group, group-local indices
};

struct MgDriftBatch {
  std::vector<int> group_sizes;
  std::vector<MgSnapshotRef> snapshots;
  long num_samples() const;
};

struct MgMvnnLossGrad {
  double loss = 0.0;
  std::vector<MlpGrads> emb_grads;
  std::vector<MlpGrads> int_grads;
};

MgMvnnLossGrad mg_mvnn_loss_grad(const MgMvnnModel& model, const MgDriftBatch& batch);

// Per-group drift for a full multigroup state.
Eigen::MatrixXd mg_mvnn_drift_all(const MgMvnnModel& model, const ParticleState& state);

// Euler / Euler-Maruyama rollout of the learned dynamics; same step contract
// as dynamics::simulate. The result's spec is tagged DriftForm::kLearned.
Trajectory mvnn_rollout(const MvnnModel& model, const ParticleState& init, double sigma,
                        double dt, long num_steps, std::uint64_t seed,
                        std::uint64_t trajectory_index = 0);

Trajectory mg_mvnn_rollout(const MgMvnnModel& model, const ParticleState& init, double sigma,
                           double dt, long num_steps, std::uint64_t seed,
                           std::uint64_t trajectory_index = 0);

}  // namespace meanfield

#endif
