#include "meanfield/train.hpp"

#include <cmath>

#include "meanfield/errors.hpp"
#include "meanfield/rng.hpp"

namespace meanfield {

namespace {

std::vector<int> with_hidden(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> dims;
  dims.push_back(in);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

}  // namespace

MvnnModel make_mvnn(Order order, int d, const ModelConfig& cfg, std::uint64_t seed) {
  MvnnModel model;
  model.order = order;
  model.d = d;
  model.k = cfg.k;
  const int sdim = model.state_dim();
  model.emb = mlp_init(with_hidden(sdim, cfg.emb_hidden, cfg.k), cfg.activation,
                       rng::mix(seed, 0xE3B));
  model.int_net = mlp_init(with_hidden(sdim + cfg.k, cfg.int_hidden, d), cfg.activation,
                           rng::mix(seed, 0x177));
  model.validate();
  return model;
}

MgMvnnModel make_mg_mvnn(int d, int num_groups, const ModelConfig& cfg, std::uint64_t seed) {
  MgMvnnModel model;
  model.d = d;
  model.embed_dims = cfg.embed_dims;
  if (model.embed_dims.empty()) model.embed_dims.assign(num_groups, cfg.k);
  if (static_cast<int>(model.embed_dims.size()) != num_groups)
    throw ConfigError("make_mg_mvnn: embed_dims size must equal group count");
  const int total = [&] {
    int t = 0;
    for (int r : model.embed_dims) t += r;
    return t;
  }();
  for (int g = 0; g < num_groups; ++g) {
    model.emb.push_back(mlp_init(with_hidden(d, cfg.emb_hidden, model.embed_dims[g]),
                                 cfg.activation, rng::mix(seed, 0xE3B, g)));
    model.int_nets.push_back(mlp_init(with_hidden(d + total, cfg.int_hidden, d),
                                      cfg.activation, rng::mix(seed, 0x177, g)));
  }
  model.validate();
  return model;
}

TrainResult train_mvnn(MvnnModel& model, const Dataset& train, const Dataset* test,
                       const OptimConfig& optim) {
  if (optim.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  AdamState emb_state = adam_init(model.emb, optim.lr, optim.beta1, optim.beta2, optim.eps, optim.weight_decay);
  AdamState int_state =
      adam_init(model.int_net, optim.lr, optim.beta1, optim.beta2, optim.eps, optim.weight_decay);

  TrainResult result;
  for (int epoch = 0; epoch < optim.epochs; ++epoch) {
    const auto batches =
        snapshot_batches(train, optim.batch_snapshots, rng::mix(optim.seed, epoch));
    double loss_sum = 0.0;
    long sample_sum = 0;
    for (const auto& batch : batches) {
      const MvnnLossGrad lg = mvnn_loss_grad(model, batch, optim.threads);
      const long b = batch.num_samples();
      loss_sum += lg.loss * static_cast<double>(b);
      sample_sum += b;
      adam_step(emb_state, model.emb, lg.emb_grads);
      adam_step(int_state, model.int_net, lg.int_grads);
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(sample_sum);
    log.test_loss = test ? dataset_mse(model, *test) : std::nan("");
    result.log.push_back(log);
  }
  result.final_train_loss = result.log.back().train_loss;
  return result;
}

TrainResult train_mg_mvnn(MgMvnnModel& model, const Dataset& train, const Dataset* test,
                          const OptimConfig& optim) {
  if (optim.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  std::vector<AdamState> emb_states, int_states;
  for (int g = 0; g < model.num_groups(); ++g) {
    emb_states.push_back(
        adam_init(model.emb[g], optim.lr, optim.beta1, optim.beta2, optim.eps, optim.weight_decay));
    int_states.push_back(
        adam_init(model.int_nets[g], optim.lr, optim.beta1, optim.beta2, optim.eps, optim.weight_decay));
  }

  TrainResult result;
  for (int epoch = 0; epoch < optim.epochs; ++epoch) {
    const auto batches =
        snapshot_batches(train, optim.batch_snapshots, rng::mix(optim.seed, epoch));
    double loss_sum = 0.0;
    long batch_count = 0;
    for (const auto& batch : batches) {
      const MgDriftBatch mg = to_mg_batch(train, batch);
      const MgMvnnLossGrad lg = mg_mvnn_loss_grad(model, mg);
      loss_sum += lg.loss;
      batch_count += 1;
      for (int g = 0; g < model.num_groups(); ++g) {
        adam_step(emb_states[g], model.emb[g], lg.emb_grads[g]);
        adam_step(int_states[g], model.int_nets[g], lg.int_grads[g]);
      }
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(batch_count);
    log.test_loss = test ? dataset_mse(model, *test) : std::nan("");
    result.log.push_back(log);
  }
  result.final_train_loss = result.log.back().train_loss;
  return result;
}

double dataset_mse(const MvnnModel& model, const Dataset& dataset) {
  double total = 0.0;
  long count = 0;
  for (const auto& snap : dataset.snapshots) {
    total += (mvnn_drift_all(model, snap.state) - snap.targets).squaredNorm();
    count += snap.state.num_particles();
  }
  return total / static_cast<double>(count);
}

double dataset_mse(const MgMvnnModel& model, const Dataset& dataset) {
  double total = 0.0;
  long count = 0;
  for (const auto& snap : dataset.snapshots) {
    total += (mg_mvnn_drift_all(model, snap.state) - snap.targets).squaredNorm();
    count += snap.state.num_particles();
  }
  return total / static_cast<double>(count);
}

std::vector<double> dataset_group_mse(const MgMvnnModel& model, const Dataset& dataset) {
  const int num_groups = static_cast<int>(dataset.group_sizes.size());
  std::vector<double> total(num_groups, 0.0);
  std::vector<long> count(num_groups, 0);
  for (const auto& snap : dataset.snapshots) {
    const Eigen::MatrixXd pred = mg_mvnn_drift_all(model, snap.state);
    int off = 0;
    for (int g = 0; g < num_groups; ++g) {
      const int ng = dataset.group_sizes[g];
      total[g] += (pred.middleCols(off, ng) - snap.targets.middleCols(off, ng)).squaredNorm();
      count[g] += ng;
      off += ng;
    }
  }
  for (int g = 0; g < num_groups; ++g) total[g] /= static_cast<double>(count[g]);
  return total;
}

std::vector<double> dataset_group_zero_mse(const Dataset& dataset) {
  const int num_groups = static_cast<int>(dataset.group_sizes.size());
  std::vector<double> total(num_groups, 0.0);
  std::vector<long> count(num_groups, 0);
  for (const auto& snap : dataset.snapshots) {
    int off = 0;
    for (int g = 0; g < num_groups; ++g) {
      const int ng = dataset.group_sizes[g];
      total[g] += snap.targets.middleCols(off, ng).squaredNorm();
      count[g] += ng;
      off += ng;
    }
  }
  for (int g = 0; g < num_groups; ++g) total[g] /= static_cast<double>(count[g]);
  return total;
}

}  // namespace meanfield
