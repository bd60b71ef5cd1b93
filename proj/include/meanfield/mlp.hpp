#ifndef MEANFIELD_MLP_HPP
#define MEANFIELD_MLP_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

namespace meanfield {

enum class Activation { kRelu, kTanh };

// Dense feedforward network parameters. Hidden layers use the configured
// activation, the output layer is identity. weights[l] maps layer l to l+1.
struct MlpParams {
  std::vector<int> layer_dims;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Activation activation = Activation::kTanh;

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  long num_params() const;
  bool all_finite() const;
};

// Gradients mirror the parameter shapes.
using MlpGrads = MlpParams;

// Intermediates of one batched forward pass; columns are samples.
struct Tape {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre_activations;   // one per layer
  std::vector<Eigen::MatrixXd> post_activations;  // hidden layers only
};

// He-uniform for relu, Xavier-uniform for tanh, zero biases.
MlpParams mlp_init(const std::vector<int>& layer_dims, Activation activation,
                   std::uint64_t seed);

MlpGrads zeros_like(const MlpParams& params);

// Batched forward pass; input is (in_dim x batch). Columns are processed
// independently so results do not depend on how a batch is composed.
Eigen::MatrixXd mlp_forward(const MlpParams& params, const Eigen::MatrixXd& input,
                            Tape* tape = nullptr);

// Single-sample convenience wrapper.
Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input,
                            Tape* tape = nullptr);

// Reverse-mode gradients of sum_cols <output_grad_col, output_col> w.r.t.
// parameters and inputs. ReLU subgradient at 0 is 0. Parameter gradients
// accumulate over batch columns in fixed column order.
struct BackwardResult {
  Eigen::MatrixXd input_grad;
  MlpGrads param_grads;
};

BackwardResult mlp_backward(const MlpParams& params, const Tape& tape,
                            const Eigen::MatrixXd& output_grad);

// Adam with bias correction.
struct AdamState {
  MlpGrads m;
  MlpGrads v;
  long t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled decay on weights only, not biases
};

AdamState adam_init(const MlpParams& params, double lr = 1e-3, double beta1 = 0.9,
                    double beta2 = 0.999, double eps = 1e-8, double weight_decay = 0.0);

void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads);

// dst += scale * src, layer by layer.
void grad_accumulate(MlpGrads& dst, const MlpGrads& src, double scale = 1.0);

// Central-difference gradient of a scalar loss; the test oracle for every
// analytic gradient path.
MlpGrads finite_diff_grad(const std::function<double(const MlpParams&)>& loss_fn,
                          const MlpParams& params, double h);

}  // namespace meanfield

#endif
