#ifndef MEANFIELD_TRAIN_HPP
#define MEANFIELD_TRAIN_HPP

#include <cstdint>
#include <vector>

#include "meanfield/data.hpp"
#include "meanfield/mvnn.hpp"

namespace meanfield {

struct OptimConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  int batch_snapshots = 4;  // whole snapshots per Adam step
  int threads = 1;          // workers for loss/grad over snapshots
  int epochs = 50;
  std::uint64_t seed = 0;
};

struct ModelConfig {
  int k = 32;
  std::vector<int> emb_hidden = {64};
  std::vector<int> int_hidden = {64};
  Activation activation = Activation::kTanh;
  std::vector<int> embed_dims;  // multigroup r_l; defaults to k per group
};

MvnnModel make_mvnn(Order order, int d, const ModelConfig& cfg, std::uint64_t seed);
MgMvnnModel make_mg_mvnn(int d, int num_groups, const ModelConfig& cfg, std::uint64_t seed);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  double final_train_loss = 0.0;
};

// Minibatch Adam over snapshot-level batches; deterministic given seeds.
TrainResult train_mvnn(MvnnModel& model, const Dataset& train, const Dataset* test,
                       const OptimConfig& optim);
TrainResult train_mg_mvnn(MgMvnnModel& model, const Dataset& train, const Dataset* test,
                          const OptimConfig& optim);

// Full-dataset drift/acceleration MSE of the model's predictions.
double dataset_mse(const MvnnModel& model, const Dataset& dataset);
double dataset_mse(const MgMvnnModel& model, const Dataset& dataset);
std::vector<double> dataset_group_mse(const MgMvnnModel& model, const Dataset& dataset);
std::vector<double> dataset_group_zero_mse(const Dataset& dataset);

}  // namespace meanfield

#endif
