#ifndef MEANFIELD_CONFIG_HPP
#define MEANFIELD_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "meanfield/data.hpp"
#include "meanfield/system.hpp"
#include "meanfield/train.hpp"

namespace meanfield {

struct EvalConfig {
  int grid = 256;
  double bandwidth = 0.0;  // <= 0 selects Silverman
  std::vector<double> times;
  int n_proj = 64;
};

struct ChaosConfig {
  std::vector<int> ladder = {128, 512, 2048, 8192};
  int n_rep = 20;
};

// One experiment end to end: ground-truth system, initial law, data sizes,
// model and optimizer settings, evaluation grid.
struct ExperimentConfig {
  SystemSpec system;
  InitSpec init;
  int num_particles = 0;   // N
  int num_trajectories = 0;  // M
  int num_steps = 0;       // L
  double dt = 0.0;
  int train_count = 0;
  int test_count = 0;
  ModelConfig model;
  OptimConfig optim;
  EvalConfig eval;
  ChaosConfig chaos;
  std::uint64_t seed = 0;

  void validate() const;
};

// Strict parse: unknown keys anywhere are errors.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

// FNV-1a over the canonical JSON dump; embedded in every output artifact.
std::string config_hash(const ExperimentConfig& config);

}  // namespace meanfield

#endif
