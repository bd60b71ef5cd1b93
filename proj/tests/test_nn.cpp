#include <doctest.h>

#include <cmath>

#include "meanfield/errors.hpp"
#include "meanfield/mlp.hpp"
#include "meanfield/rng.hpp"

using namespace meanfield;

namespace {

// Straight-line forward pass written independently of the library: plain
// scalar loops, no Eigen products.
Eigen::VectorXd oracle_forward(const MlpParams& p, const Eigen::VectorXd& x) {
  std::vector<double> a(x.data(), x.data() + x.size());
  for (int l = 0; l < p.num_layers(); ++l) {
    const int n_out = static_cast<int>(p.weights[l].rows());
    const int n_in = static_cast<int>(p.weights[l].cols());
    std::vector<double> z(n_out);
    for (int i = 0; i < n_out; ++i) {
      double s = p.biases[l](i);
      for (int j = 0; j < n_in; ++j) s += p.weights[l](i, j) * a[j];
      z[i] = s;
    }
    if (l + 1 < p.num_layers()) {
      for (int i = 0; i < n_out; ++i) {
        if (p.activation == Activation::kRelu)
          z[i] = z[i] > 0.0 ? z[i] : 0.0;
        else
          z[i] = std::tanh(z[i]);
      }
    }
    a = std::move(z);
  }
  Eigen::VectorXd out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out(i) = a[i];
  return out;
}

Eigen::MatrixXd random_input(int rows, int cols, std::uint64_t seed) {
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = rng::normal(seed, r, c);
  return m;
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1e-12, std::abs(want));
}

}  // namespace

TEST_CASE("mlp_init respects He bound and zero biases") {
  const MlpParams p = mlp_init({1, 1}, Activation::kRelu, 0);
  const double bound = std::sqrt(6.0 / 1.0);
  CHECK(std::abs(p.weights[0](0, 0)) <= bound);
  CHECK(p.biases[0](0) == 0.0);
}

TEST_CASE("mlp_init is deterministic and Xavier-bounded for tanh") {
  const MlpParams a = mlp_init({3, 5, 2}, Activation::kTanh, 42);
  const MlpParams b = mlp_init({3, 5, 2}, Activation::kTanh, 42);
  for (int l = 0; l < a.num_layers(); ++l) {
    CHECK(a.weights[l] == b.weights[l]);
    const int n_in = static_cast<int>(a.weights[l].cols());
    const int n_out = static_cast<int>(a.weights[l].rows());
    const double bound = std::sqrt(6.0 / (n_in + n_out));
    CHECK(a.weights[l].cwiseAbs().maxCoeff() <= bound);
  }
  const MlpParams c = mlp_init({3, 5, 2}, Activation::kTanh, 43);
  CHECK(a.weights[0] != c.weights[0]);
}

TEST_CASE("mlp_init rejects bad dims") {
  CHECK_THROWS_AS(mlp_init({3}, Activation::kTanh, 0), ConfigError);
  CHECK_THROWS_AS(mlp_init({3, 0, 2}, Activation::kTanh, 0), ConfigError);
}

TEST_CASE("mlp_forward matches an independent straight-line recomputation") {
  for (const Activation act : {Activation::kRelu, Activation::kTanh}) {
    const MlpParams p = mlp_init({4, 7, 5, 3}, act, 7);
    const Eigen::MatrixXd x = random_input(4, 6, 99);
    const Eigen::MatrixXd y = mlp_forward(p, x);
    REQUIRE(y.rows() == 3);
    REQUIRE(y.cols() == 6);
    for (int c = 0; c < x.cols(); ++c) {
      const Eigen::VectorXd want = oracle_forward(p, x.col(c));
      CHECK((y.col(c) - want).cwiseAbs().maxCoeff() <= 1e-13);
    }
  }
}

TEST_CASE("single-sample forward equals the batched column exactly") {
  const MlpParams p = mlp_init({3, 8, 2}, Activation::kTanh, 11);
  const Eigen::MatrixXd x = random_input(3, 5, 4);
  const Eigen::MatrixXd batched = mlp_forward(p, x);
  for (int c = 0; c < x.cols(); ++c) {
    const Eigen::VectorXd single = mlp_forward(p, Eigen::VectorXd(x.col(c)));
    CHECK(single == batched.col(c));
  }
}

TEST_CASE("mlp_forward rejects wrong input dim") {
  const MlpParams p = mlp_init({3, 4, 2}, Activation::kTanh, 5);
  CHECK_THROWS_AS(mlp_forward(p, Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 4))), ShapeError);
}

TEST_CASE("mlp_backward matches central finite differences on a 3-layer net") {
  for (const Activation act : {Activation::kTanh, Activation::kRelu}) {
    const MlpParams p = mlp_init({3, 6, 4, 2}, act, 13);
    const Eigen::MatrixXd x = random_input(3, 5, 8);
    const Eigen::MatrixXd target = random_input(2, 5, 9);

    auto loss_fn = [&](const MlpParams& q) {
      const Eigen::MatrixXd y = mlp_forward(q, x);
      return 0.5 * (y - target).squaredNorm();
    };

    Tape tape;
    const Eigen::MatrixXd y = mlp_forward(p, x, &tape);
    const BackwardResult back = mlp_backward(p, tape, y - target);
    const MlpGrads fd = finite_diff_grad(loss_fn, p, 1e-6);

    for (int l = 0; l < p.num_layers(); ++l) {
      for (int i = 0; i < p.weights[l].rows(); ++i) {
        for (int j = 0; j < p.weights[l].cols(); ++j) {
          const double want = fd.weights[l](i, j);
          const double got = back.param_grads.weights[l](i, j);
          CHECK(std::abs(got - want) <= 1e-5 * std::max(1.0, std::abs(want)));
        }
        CHECK(std::abs(back.param_grads.biases[l](i) - fd.biases[l](i)) <=
              1e-5 * std::max(1.0, std::abs(fd.biases[l](i))));
      }
    }
  }
}

TEST_CASE("mlp_backward input gradient matches finite differences") {
  const MlpParams p = mlp_init({3, 6, 2}, Activation::kTanh, 17);
  Eigen::MatrixXd x = random_input(3, 4, 2);
  const Eigen::MatrixXd target = random_input(2, 4, 3);

  Tape tape;
  const Eigen::MatrixXd y = mlp_forward(p, x, &tape);
  const BackwardResult back = mlp_backward(p, tape, y - target);

  const double h = 1e-6;
  for (int c = 0; c < x.cols(); ++c) {
    for (int r = 0; r < x.rows(); ++r) {
      const double keep = x(r, c);
      x(r, c) = keep + h;
      const double up = 0.5 * (mlp_forward(p, x) - target).squaredNorm();
      x(r, c) = keep - h;
      const double down = 0.5 * (mlp_forward(p, x) - target).squaredNorm();
      x(r, c) = keep;
      const double want = (up - down) / (2.0 * h);
      CHECK(std::abs(back.input_grad(r, c) - want) <= 1e-5 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("batch gradient is the sum of per-sample gradients") {
  const MlpParams p = mlp_init({2, 5, 2}, Activation::kTanh, 21);
  const Eigen::MatrixXd x = random_input(2, 3, 6);
  const Eigen::MatrixXd g = random_input(2, 3, 7);

  Tape tape;
  mlp_forward(p, x, &tape);
  const BackwardResult whole = mlp_backward(p, tape, g);

  MlpGrads acc = zeros_like(p);
  for (int c = 0; c < x.cols(); ++c) {
    Tape t;
    mlp_forward(p, Eigen::MatrixXd(x.col(c)), &t);
    grad_accumulate(acc, mlp_backward(p, t, Eigen::MatrixXd(g.col(c))).param_grads);
  }
  for (int l = 0; l < p.num_layers(); ++l) {
    CHECK((whole.param_grads.weights[l] - acc.weights[l]).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((whole.param_grads.biases[l] - acc.biases[l]).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("adam first step matches the hand recurrence") {
  // g=1, fresh state: m=0.1, v=0.001, m_hat=1, v_hat=1,
  // dtheta = -lr * 1/(1 + eps) ~ -lr.
  MlpParams p;
  p.layer_dims = {1, 1};
  p.weights = {Eigen::MatrixXd::Zero(1, 1)};
  p.biases = {Eigen::VectorXd::Zero(1)};
  MlpGrads g = zeros_like(p);
  g.weights[0](0, 0) = 1.0;

  AdamState st = adam_init(p, 0.001, 0.9, 0.999, 1e-8);
  adam_step(st, p, g);
  const double want1 = -0.001 * (1.0 / (1.0 + 1e-8));
  CHECK(std::abs(p.weights[0](0, 0) - want1) <= 1e-6);

  // Second step with g=1 again, by the t=2 recurrence.
  adam_step(st, p, g);
  const double m2 = 0.9 * 0.1 + 0.1 * 1.0;
  const double v2 = 0.999 * 0.001 + 0.001 * 1.0;
  const double m_hat = m2 / (1.0 - std::pow(0.9, 2));
  const double v_hat = v2 / (1.0 - std::pow(0.999, 2));
  const double want2 = want1 - 0.001 * m_hat / (std::sqrt(v_hat) + 1e-8);
  CHECK(std::abs(p.weights[0](0, 0) - want2) <= 1e-9);
}

TEST_CASE("adam rejects non-finite gradients") {
  MlpParams p = mlp_init({2, 2}, Activation::kTanh, 1);
  MlpGrads g = zeros_like(p);
  g.weights[0](0, 0) = std::nan("");
  AdamState st = adam_init(p);
  CHECK_THROWS_AS(adam_step(st, p, g), DivergedError);
}

TEST_CASE("adam drives a quadratic toward its minimum") {
  MlpParams p;
  p.layer_dims = {1, 1};
  p.weights = {Eigen::MatrixXd::Constant(1, 1, 3.0)};
  p.biases = {Eigen::VectorXd::Zero(1)};
  AdamState st = adam_init(p, 0.05);
  for (int t = 0; t < 500; ++t) {
    MlpGrads g = zeros_like(p);
    g.weights[0](0, 0) = 2.0 * (p.weights[0](0, 0) - 1.0);
    adam_step(st, p, g);
  }
  CHECK(std::abs(p.weights[0](0, 0) - 1.0) <= 1e-2);
}

TEST_CASE("counter rng is a pure function of its key tuple") {
  CHECK(rng::uniform(1, 2, 3) == rng::uniform(1, 2, 3));
  CHECK(rng::uniform(1, 2, 3) != rng::uniform(1, 2, 4));
  const double u = rng::uniform(5, 0, 0, 0, 0);
  CHECK(u > 0.0);
  CHECK(u <= 1.0);
}

TEST_CASE("counter normals have sane first moments") {
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = rng::normal(123, i);
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) <= 0.03);
  CHECK(rel_err(sq / n, 1.0) <= 0.03);
}
