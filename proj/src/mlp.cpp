#include "meanfield/mlp.hpp"

#include <cmath>

#include "meanfield/errors.hpp"
#include "meanfield/rng.hpp"

namespace meanfield {

long MlpParams::num_params() const {
  long n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

bool MlpParams::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

MlpParams mlp_init(const std::vector<int>& layer_dims, Activation activation,
                   std::uint64_t seed) {
  if (layer_dims.size() < 2) throw ConfigError("mlp_init: need at least 2 layer dims");
  for (int d : layer_dims) {
    if (d < 1) throw ConfigError("mlp_init: layer dims must be >= 1");
  }
  MlpParams p;
  p.layer_dims = layer_dims;
  p.activation = activation;
  const std::size_t num_layers = layer_dims.size() - 1;
  p.weights.resize(num_layers);
  p.biases.resize(num_layers);
  for (std::size_t l = 0; l < num_layers; ++l) {
    const int n_in = layer_dims[l];
    const int n_out = layer_dims[l + 1];
    const double bound = activation == Activation::kRelu
                             ? std::sqrt(6.0 / n_in)
                             : std::sqrt(6.0 / (n_in + n_out));
    p.weights[l].resize(n_out, n_in);
    for (int i = 0; i < n_out; ++i) {
      for (int j = 0; j < n_in; ++j) {
        const double u = rng::uniform(seed, l, static_cast<std::uint64_t>(i),
                                      static_cast<std::uint64_t>(j));
        p.weights[l](i, j) = bound * (2.0 * u - 1.0);
      }
    }
    p.biases[l] = Eigen::VectorXd::Zero(n_out);
  }
  return p;
}

MlpGrads zeros_like(const MlpParams& params) {
  MlpGrads g;
  g.layer_dims = params.layer_dims;
  g.activation = params.activation;
  g.weights.reserve(params.weights.size());
  g.biases.reserve(params.biases.size());
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(params.weights[l].rows(), params.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(params.biases[l].size()));
  }
  return g;
}

namespace {

void apply_activation(Activation act, Eigen::MatrixXd& x) {
  if (act == Activation::kRelu) {
    x = x.cwiseMax(0.0);
  } else {
    x = x.array().tanh().matrix();
  }
}

}  // namespace

Eigen::MatrixXd mlp_forward(const MlpParams& params, const Eigen::MatrixXd& input,
                            Tape* tape) {
  if (input.rows() != params.input_dim())
    throw ShapeError("mlp_forward: input dim " + std::to_string(input.rows()) +
                     " != " + std::to_string(params.input_dim()));
  const int num_layers = params.num_layers();
  if (tape) {
    tape->input = input;
    tape->pre_activations.assign(num_layers, {});
    tape->post_activations.assign(num_layers > 0 ? num_layers - 1 : 0, {});
  }
  Eigen::MatrixXd a = input;
  for (int l = 0; l < num_layers; ++l) {
    Eigen::MatrixXd z(params.weights[l].rows(), a.cols());
    // Per-column matrix-vector products keep each sample's result
    // independent of the batch it rides in.
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      z.col(c).noalias() = params.weights[l] * a.col(c) + params.biases[l];
    if (tape) tape->pre_activations[l] = z;
    if (l + 1 < num_layers) {
      apply_activation(params.activation, z);
      if (tape) tape->post_activations[l] = z;
    }
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input,
                            Tape* tape) {
  return mlp_forward(params, Eigen::MatrixXd(input), tape).col(0);
}

BackwardResult mlp_backward(const MlpParams& params, const Tape& tape,
                            const Eigen::MatrixXd& output_grad) {
  const int num_layers = params.num_layers();
  if (static_cast<int>(tape.pre_activations.size()) != num_layers ||
      tape.input.rows() != params.input_dim())
    throw ShapeError("mlp_backward: tape does not match params");
  if (output_grad.rows() != params.output_dim() || output_grad.cols() != tape.input.cols())
    throw ShapeError("mlp_backward: output_grad shape mismatch");

  BackwardResult res;
  res.param_grads = zeros_like(params);

  Eigen::MatrixXd delta = output_grad;  // gradient w.r.t. pre-activation of layer l
  for (int l = num_layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& a_prev = (l == 0) ? tape.input : tape.post_activations[l - 1];
    // Gradients are only consumed through tolerance-based contracts, so the
    // batched products are fine here; the forward pass stays per-column.
    res.param_grads.weights[l].noalias() = delta * a_prev.transpose();
    res.param_grads.biases[l].noalias() = delta.rowwise().sum();
    Eigen::MatrixXd prev(a_prev.rows(), delta.cols());
    prev.noalias() = params.weights[l].transpose() * delta;
    if (l > 0) {
      if (params.activation == Activation::kRelu) {
        prev = (tape.pre_activations[l - 1].array() > 0.0).cast<double>() * prev.array();
      } else {
        prev = (1.0 - tape.post_activations[l - 1].array().square()) * prev.array();
      }
    }
    delta = std::move(prev);
  }
  res.input_grad = std::move(delta);
  return res;
}

AdamState adam_init(const MlpParams& params, double lr, double beta1, double beta2,
                    double eps, double weight_decay) {
  AdamState s;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  s.weight_decay = weight_decay;
  return s;
}

void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    if (grads.weights[l].rows() != params.weights[l].rows() ||
        grads.weights[l].cols() != params.weights[l].cols())
      throw ShapeError("adam_step: gradient shape mismatch");
    if (!grads.weights[l].allFinite() || !grads.biases[l].allFinite())
      throw DivergedError("adam_step: non-finite gradient");
    auto update = [&](Eigen::Ref<Eigen::MatrixXd> m, Eigen::Ref<Eigen::MatrixXd> v,
                      Eigen::Ref<Eigen::MatrixXd> p, const Eigen::MatrixXd& g) {
      m = state.beta1 * m + (1.0 - state.beta1) * g;
      v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
      p.array() -= state.lr * (m.array() / bc1) /
                   ((v.array() / bc2).sqrt() + state.eps);
    };
    update(state.m.weights[l], state.v.weights[l], params.weights[l], grads.weights[l]);
    if (state.weight_decay > 0.0)
      params.weights[l] *= 1.0 - state.lr * state.weight_decay;
    Eigen::MatrixXd gb = grads.biases[l];
    Eigen::Map<Eigen::MatrixXd> mb(state.m.biases[l].data(), state.m.biases[l].size(), 1);
    Eigen::Map<Eigen::MatrixXd> vb(state.v.biases[l].data(), state.v.biases[l].size(), 1);
    Eigen::Map<Eigen::MatrixXd> pb(params.biases[l].data(), params.biases[l].size(), 1);
    update(mb, vb, pb, gb);
  }
}

void grad_accumulate(MlpGrads& dst, const MlpGrads& src, double scale) {
  if (dst.weights.size() != src.weights.size())
    throw ShapeError("grad_accumulate: layer count mismatch");
  for (std::size_t l = 0; l < dst.weights.size(); ++l) {
    dst.weights[l] += scale * src.weights[l];
    dst.biases[l] += scale * src.biases[l];
  }
}

MlpGrads finite_diff_grad(const std::function<double(const MlpParams&)>& loss_fn,
                          const MlpParams& params, double h) {
  MlpGrads g = zeros_like(params);
  MlpParams probe = params;
  auto central = [&](double& coord, double& out) {
    const double orig = coord;
    coord = orig + h;
    const double up = loss_fn(probe);
    coord = orig - h;
    const double down = loss_fn(probe);
    coord = orig;
    out = (up - down) / (2.0 * h);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < probe.weights[l].size(); ++i)
      central(probe.weights[l].data()[i], g.weights[l].data()[i]);
    for (Eigen::Index i = 0; i < probe.biases[l].size(); ++i)
      central(probe.biases[l].data()[i], g.biases[l].data()[i]);
  }
  return g;
}

}  // namespace meanfield
