#include "meanfield/mvnn.hpp"

#include <future>

#include <cmath>

#include "meanfield/dynamics.hpp"
#include "meanfield/errors.hpp"

namespace meanfield {

void MvnnModel::validate() const {
  if (d < 1 || k < 1) throw ConfigError("mvnn: d and k must be >= 1");
  if (emb.input_dim() != state_dim())
    throw ShapeError("mvnn: embedding input dim must equal state dim");
  if (emb.output_dim() != k) throw ShapeError("mvnn: embedding output dim must equal k");
  if (int_net.input_dim() != state_dim() + k)
    throw ShapeError("mvnn: interaction input dim must equal state dim + k");
  if (int_net.output_dim() != d)
    throw ShapeError("mvnn: interaction output dim must equal d");
}

int MgMvnnModel::total_embed_dim() const {
  int total = 0;
  for (int r : embed_dims) total += r;
  return total;
}

void MgMvnnModel::validate() const {
  const int num = num_groups();
  if (num < 1) throw ConfigError("mg_mvnn: need at least one group");
  if (static_cast<int>(embed_dims.size()) != num ||
      static_cast<int>(int_nets.size()) != num)
    throw ShapeError("mg_mvnn: per-group nets and embed dims must align");
  const int total = total_embed_dim();
  for (int l = 0; l < num; ++l) {
    if (emb[l].input_dim() != d || emb[l].output_dim() != embed_dims[l])
      throw ShapeError("mg_mvnn: embedding net dims mismatch");
    if (int_nets[l].input_dim() != d + total || int_nets[l].output_dim() != d)
      throw ShapeError("mg_mvnn: interaction net dims mismatch");
  }
}

long DriftBatch::num_samples() const {
  long n = 0;
  for (const auto& s : snapshots) n += static_cast<long>(s.sample_indices.size());
  return n;
}

long MgDriftBatch::num_samples() const {
  long n = 0;
  for (const auto& s : snapshots)
    for (const auto& idx : s.sample_indices) n += static_cast<long>(idx.size());
  return n;
}

namespace {

// Embedding input: positions, or stacked (positions; velocities) for
// second-order models.
Eigen::MatrixXd embed_input(const MvnnModel& model, const ParticleState& particles) {
  if (model.order == Order::kFirst) return particles.positions;
  if (!particles.velocities)
    throw ShapeError("mvnn: second-order model needs velocities");
  Eigen::MatrixXd in(2 * model.d, particles.num_particles());
  in.topRows(model.d) = particles.positions;
  in.bottomRows(model.d) = *particles.velocities;
  return in;
}

Eigen::VectorXd ordered_col_mean(const Eigen::MatrixXd& m) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(m.rows());
  for (Eigen::Index c = 0; c < m.cols(); ++c) z += m.col(c);
  return z / static_cast<double>(m.cols());
}

}  // namespace

Eigen::VectorXd embed_mean(const MvnnModel& model, const ParticleState& particles) {
  if (particles.num_particles() < 1) throw ShapeError("embed_mean: empty state");
  return ordered_col_mean(mlp_forward(model.emb, embed_input(model, particles)));
}

Eigen::VectorXd mvnn_drift(const MvnnModel& model, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& z) {
  if (x.size() != model.state_dim() || z.size() != model.k)
    throw ShapeError("mvnn_drift: input dims mismatch");
  Eigen::VectorXd in(x.size() + z.size());
  in << x, z;
  return mlp_forward(model.int_net, in);
}

Eigen::VectorXd second_order_drift(const MvnnModel& model, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& v, const Eigen::VectorXd& z) {
  if (model.order != Order::kSecond)
    throw ShapeError("second_order_drift: model is first-order");
  if (x.size() != model.d || v.size() != model.d || z.size() != model.k)
    throw ShapeError("second_order_drift: input dims mismatch");
  Eigen::VectorXd xv(2 * model.d);
  xv << x, v;
  return mvnn_drift(model, xv, z);
}

Eigen::MatrixXd mvnn_drift_all(const MvnnModel& model, const ParticleState& particles) {
  const int n = particles.num_particles();
  if (n < 1) throw ShapeError("mvnn_drift_all: empty state");
  const Eigen::VectorXd z = embed_mean(model, particles);
  const Eigen::MatrixXd states = embed_input(model, particles);
  Eigen::MatrixXd in(states.rows() + model.k, n);
  in.topRows(states.rows()) = states;
  in.bottomRows(model.k).colwise() = z;
  return mlp_forward(model.int_net, in);
}

namespace {

// One snapshot's contribution to the batch loss and gradients; `total` is the
// sample count of the whole batch so gradients stay correctly normalized.
MvnnLossGrad snapshot_loss_grad(const MvnnModel& model, const SnapshotRef& snap, long total) {
  MvnnLossGrad out;
  out.emb_grads = zeros_like(model.emb);
  out.int_grads = zeros_like(model.int_net);
  const int sdim = model.state_dim();
  const ParticleState& state = *snap.state;
  const int n = state.num_particles();
  const int b = static_cast<int>(snap.sample_indices.size());

  Tape emb_tape;
  const Eigen::MatrixXd emb_in = embed_input(model, state);
  const Eigen::MatrixXd emb_out = mlp_forward(model.emb, emb_in, &emb_tape);
  const Eigen::VectorXd z = ordered_col_mean(emb_out);

  Eigen::MatrixXd int_in(sdim + model.k, b);
  Eigen::MatrixXd targets(model.d, b);
  for (int s = 0; s < b; ++s) {
    const int i = snap.sample_indices[s];
    int_in.col(s).head(sdim) = emb_in.col(i);
    int_in.col(s).tail(model.k) = z;
    targets.col(s) = snap.targets->col(i);
  }

  Tape int_tape;
  const Eigen::MatrixXd pred = mlp_forward(model.int_net, int_in, &int_tape);
  const Eigen::MatrixXd residual = pred - targets;
  out.loss = residual.squaredNorm();

  // d(mean loss)/d(pred) = 2 * residual / total
  const Eigen::MatrixXd out_grad = (2.0 / static_cast<double>(total)) * residual;
  const BackwardResult int_back = mlp_backward(model.int_net, int_tape, out_grad);
  grad_accumulate(out.int_grads, int_back.param_grads);

  // Gradient through z: every sampled term sees the same z, and z averages
  // all N particles of the snapshot.
  Eigen::VectorXd z_grad = Eigen::VectorXd::Zero(model.k);
  for (int s = 0; s < b; ++s) z_grad += int_back.input_grad.col(s).tail(model.k);
  Eigen::MatrixXd emb_out_grad(model.k, n);
  emb_out_grad.colwise() = Eigen::VectorXd(z_grad / static_cast<double>(n));
  const BackwardResult emb_back = mlp_backward(model.emb, emb_tape, emb_out_grad);
  grad_accumulate(out.emb_grads, emb_back.param_grads);
  return out;
}

}  // namespace

MvnnLossGrad mvnn_loss_grad(const MvnnModel& model, const DriftBatch& batch, int threads) {
  const long total = batch.num_samples();
  if (total == 0) throw ConfigError("mvnn_loss_grad: empty batch");
  const std::size_t num_snaps = batch.snapshots.size();

  // Per-snapshot contributions, then one reduction in snapshot order: the
  // result is bit-identical for every thread count.
  std::vector<MvnnLossGrad> parts(num_snaps);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      if (batch.snapshots[s].sample_indices.empty()) continue;
      parts[s] = snapshot_loss_grad(model, batch.snapshots[s], total);
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(num_snaps)));
  if (workers == 1) {
    work(0, num_snaps);
  } else {
    std::vector<std::future<void>> futures;
    const std::size_t chunk = (num_snaps + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(num_snaps, begin + chunk);
      if (begin >= end) break;
      futures.push_back(std::async(std::launch::async, work, begin, end));
    }
    for (auto& f : futures) f.get();
  }

  MvnnLossGrad out;
  out.emb_grads = zeros_like(model.emb);
  out.int_grads = zeros_like(model.int_net);
  for (std::size_t s = 0; s < num_snaps; ++s) {
    if (batch.snapshots[s].sample_indices.empty()) continue;
    out.loss += parts[s].loss;
    grad_accumulate(out.emb_grads, parts[s].emb_grads);
    grad_accumulate(out.int_grads, parts[s].int_grads);
  }
  out.loss /= static_cast<double>(total);
  if (!std::isfinite(out.loss)) throw DivergedError("mvnn_loss_grad: non-finite loss");
  return out;
}

namespace {

std::vector<int> group_offsets(const std::vector<int>& sizes) {
  std::vector<int> off(sizes.size() + 1, 0);
  for (std::size_t g = 0; g < sizes.size(); ++g) off[g + 1] = off[g] + sizes[g];
  return off;
}

}  // namespace

MgMvnnLossGrad mg_mvnn_loss_grad(const MgMvnnModel& model, const MgDriftBatch& batch) {
  const int num_groups = model.num_groups();
  if (static_cast<int>(batch.group_sizes.size()) != num_groups)
    throw ShapeError("mg_mvnn_loss_grad: group count mismatch");
  if (batch.num_samples() == 0) throw ConfigError("mg_mvnn_loss_grad: empty batch");

  MgMvnnLossGrad out;
  out.emb_grads.reserve(num_groups);
  out.int_grads.reserve(num_groups);
  for (int g = 0; g < num_groups; ++g) {
    out.emb_grads.push_back(zeros_like(model.emb[g]));
    out.int_grads.push_back(zeros_like(model.int_nets[g]));
  }

  const auto offsets = group_offsets(batch.group_sizes);
  const int total_embed = model.total_embed_dim();
  const double num_snaps = static_cast<double>(batch.snapshots.size());

  for (const auto& snap : batch.snapshots) {
    const ParticleState& state = *snap.state;
    if (state.num_particles() != offsets.back())
      throw ShapeError("mg_mvnn_loss_grad: state size mismatch");

    // Per-group embedding means, concatenated in group order.
    std::vector<Tape> emb_tapes(num_groups);
    Eigen::VectorXd z_all(total_embed);
    int zoff = 0;
    std::vector<int> z_offsets(num_groups);
    for (int l = 0; l < num_groups; ++l) {
      const Eigen::MatrixXd block =
          state.positions.middleCols(offsets[l], batch.group_sizes[l]);
      const Eigen::MatrixXd emb_out = mlp_forward(model.emb[l], block, &emb_tapes[l]);
      z_all.segment(zoff, model.embed_dims[l]) = ordered_col_mean(emb_out);
      z_offsets[l] = zoff;
      zoff += model.embed_dims[l];
    }

    Eigen::VectorXd z_grad = Eigen::VectorXd::Zero(total_embed);
    for (int k = 0; k < num_groups; ++k) {
      const auto& samples = snap.sample_indices[k];
      if (samples.empty()) continue;
      const int b = static_cast<int>(samples.size());
      Eigen::MatrixXd int_in(model.d + total_embed, b);
      Eigen::MatrixXd targets(model.d, b);
      for (int s = 0; s < b; ++s) {
        int_in.col(s).head(model.d) = state.positions.col(offsets[k] + samples[s]);
        int_in.col(s).tail(total_embed) = z_all;
        targets.col(s) = snap.targets->col(offsets[k] + samples[s]);
      }
      Tape int_tape;
      const Eigen::MatrixXd pred = mlp_forward(model.int_nets[k], int_in, &int_tape);
      const Eigen::MatrixXd residual = pred - targets;
      // Per-group batch mean approximates (1/N_k) sum_i; snapshot terms are
      // averaged and group terms summed, matching the global objective.
      const double scale = 1.0 / (num_snaps * static_cast<double>(b));
      out.loss += scale * residual.squaredNorm();
      const BackwardResult int_back =
          mlp_backward(model.int_nets[k], int_tape, Eigen::MatrixXd(2.0 * scale * residual));
      grad_accumulate(out.int_grads[k], int_back.param_grads);
      for (int s = 0; s < b; ++s) z_grad += int_back.input_grad.col(s).tail(total_embed);
    }

    for (int l = 0; l < num_groups; ++l) {
      const int nl = batch.group_sizes[l];
      Eigen::MatrixXd emb_out_grad(model.embed_dims[l], nl);
      emb_out_grad.colwise() = Eigen::VectorXd(
          z_grad.segment(z_offsets[l], model.embed_dims[l]) / static_cast<double>(nl));
      const BackwardResult emb_back =
          mlp_backward(model.emb[l], emb_tapes[l], emb_out_grad);
      grad_accumulate(out.emb_grads[l], emb_back.param_grads);
    }
  }
  if (!std::isfinite(out.loss)) throw DivergedError("mg_mvnn_loss_grad: non-finite loss");
  return out;
}

Eigen::MatrixXd mg_mvnn_drift_all(const MgMvnnModel& model, const ParticleState& state) {
  const int num_groups = model.num_groups();
  if (static_cast<int>(state.group_sizes.size()) != num_groups)
    throw ShapeError("mg_mvnn_drift_all: state group count mismatch");
  const auto offsets = group_offsets(state.group_sizes);
  if (offsets.back() != state.num_particles())
    throw ShapeError("mg_mvnn_drift_all: group sizes inconsistent");

  const int total_embed = model.total_embed_dim();
  Eigen::VectorXd z_all(total_embed);
  int zoff = 0;
  for (int l = 0; l < num_groups; ++l) {
    const Eigen::MatrixXd block = state.positions.middleCols(offsets[l], state.group_sizes[l]);
    z_all.segment(zoff, model.embed_dims[l]) =
        ordered_col_mean(mlp_forward(model.emb[l], block));
    zoff += model.embed_dims[l];
  }

  Eigen::MatrixXd drift(model.d, state.num_particles());
  for (int k = 0; k < num_groups; ++k) {
    const int nk = state.group_sizes[k];
    Eigen::MatrixXd int_in(model.d + total_embed, nk);
    int_in.topRows(model.d) = state.positions.middleCols(offsets[k], nk);
    int_in.bottomRows(total_embed).colwise() = z_all;
    drift.middleCols(offsets[k], nk) = mlp_forward(model.int_nets[k], int_in);
  }
  return drift;
}

namespace {

Trajectory rollout_impl(const DriftFn& drift_fn, Order order, int dimension,
                        const ParticleState& init, double sigma, double dt, long num_steps,
                        std::uint64_t seed, std::uint64_t trajectory_index) {
  Trajectory traj;
  traj.spec.order = order;
  traj.spec.dimension = dimension;
  traj.spec.drift_form = DriftForm::kLearned;
  traj.spec.sigma = sigma;
  traj.dt = dt;
  traj.seed = seed;
  traj.states.reserve(num_steps + 1);
  traj.states.push_back(init);
  for (long l = 0; l < num_steps; ++l) {
    traj.states.push_back(step(traj.states.back(), drift_fn, order, sigma, dt,
                               {seed, trajectory_index, l}));
  }
  return traj;
}

}  // namespace

Trajectory mvnn_rollout(const MvnnModel& model, const ParticleState& init, double sigma,
                        double dt, long num_steps, std::uint64_t seed,
                        std::uint64_t trajectory_index) {
  model.validate();
  if (init.dim() != model.d) throw ShapeError("mvnn_rollout: dimension mismatch");
  if (model.order == Order::kSecond && !init.velocities)
    throw ShapeError("mvnn_rollout: second-order model needs initial velocities");
  auto drift_fn = [&model](const ParticleState& s) { return mvnn_drift_all(model, s); };
  return rollout_impl(drift_fn, model.order, model.d, init, sigma, dt, num_steps, seed,
                      trajectory_index);
}

Trajectory mg_mvnn_rollout(const MgMvnnModel& model, const ParticleState& init, double sigma,
                           double dt, long num_steps, std::uint64_t seed,
                           std::uint64_t trajectory_index) {
  model.validate();
  if (init.dim() != model.d) throw ShapeError("mg_mvnn_rollout: dimension mismatch");
  auto drift_fn = [&model](const ParticleState& s) { return mg_mvnn_drift_all(model, s); };
  return rollout_impl(drift_fn, Order::kFirst, model.d, init, sigma, dt, num_steps, seed,
                      trajectory_index);
}

}  // namespace meanfield
