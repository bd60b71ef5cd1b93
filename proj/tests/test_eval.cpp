#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "meanfield/errors.hpp"
#include "meanfield/metrics.hpp"
#include "meanfield/rng.hpp"

using namespace meanfield;

namespace {

std::vector<double> random_points(int n, std::uint64_t seed, double scale = 1.0) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = scale * rng::normal(seed, i);
  return out;
}

// Optimal transport between equal-weight point sets by enumerating all
// couplings (permutations); feasible for n <= 6.
double brute_force_w(std::vector<double> a, std::vector<double> b, int p) {
  std::vector<int> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double diff = std::abs(a[i] - b[perm[i]]);
      cost += p == 1 ? diff : diff * diff;
    }
    best = std::min(best, cost / a.size());
  } while (std::next_permutation(perm.begin(), perm.end()));
  return p == 1 ? best : std::sqrt(best);
}

Eigen::VectorXd linspace(double lo, double hi, int n) {
  return Eigen::VectorXd::LinSpaced(n, lo, hi);
}

}  // namespace

TEST_CASE("kde hand value: two samples, unit bandwidth") {
  Eigen::MatrixXd samples(1, 2);
  samples << -1.0, 1.0;
  const DensityGrid g = gaussian_kde(samples, 1.0, {linspace(-1.0, 1.0, 3)});
  const double want = std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi);
  CHECK(g.values(1) == doctest::Approx(want).epsilon(1e-7));
  CHECK(g.values(1) == doctest::Approx(0.2419707).epsilon(1e-6));
}

TEST_CASE("kde mass is one on an adequate grid") {
  for (std::uint64_t seed : {1, 2, 3}) {
    Eigen::MatrixXd samples(1, 200);
    for (int i = 0; i < 200; ++i) samples(0, i) = rng::normal(seed, i);
    const DensityGrid g = gaussian_kde_auto_grid(samples, 0.0, 512);
    CHECK(std::abs(g.integral() - 1.0) <= 1e-3);
  }
  // 2D as well.
  Eigen::MatrixXd s2(2, 100);
  for (int i = 0; i < 100; ++i)
    for (int c = 0; c < 2; ++c) s2(c, i) = rng::normal(9, i, c);
  const DensityGrid g2 = gaussian_kde_auto_grid(s2, 0.0, 128);
  CHECK(std::abs(g2.integral() - 1.0) <= 1e-3);
}

TEST_CASE("silverman bandwidth matches the 1d formula") {
  Eigen::MatrixXd samples(1, 100);
  for (int i = 0; i < 100; ++i) samples(0, i) = rng::normal(4, i);
  const double mean = samples.row(0).mean();
  const double sd =
      std::sqrt((samples.row(0).array() - mean).square().sum() / 99.0);
  const double want = std::pow(4.0 / 3.0, 0.2) * std::pow(100.0, -0.2) * sd;
  CHECK(silverman_bandwidth(samples) == doctest::Approx(want).epsilon(1e-12));
  CHECK_THROWS_AS(silverman_bandwidth(Eigen::MatrixXd::Ones(1, 10)), DomainError);
}

TEST_CASE("l2 density error matches the closed form for shifted gaussians") {
  const double delta = 0.1;
  const Eigen::VectorXd axis = linspace(-8.0, 8.0 + delta, 4001);
  DensityGrid f, g;
  f.axes = {axis};
  g.axes = {axis};
  f.values.resize(axis.size());
  g.values.resize(axis.size());
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (int i = 0; i < axis.size(); ++i) {
    f.values(i) = norm * std::exp(-0.5 * axis(i) * axis(i));
    g.values(i) = norm * std::exp(-0.5 * (axis(i) - delta) * (axis(i) - delta));
  }
  const double want =
      std::sqrt((1.0 - std::exp(-delta * delta / 4.0)) / std::sqrt(std::numbers::pi));
  CHECK(l2_density_error(f, g) == doctest::Approx(want).epsilon(1e-6));
  CHECK(l2_density_error(f, f) == 0.0);
}

TEST_CASE("wasserstein hand values") {
  CHECK(wasserstein_1d({0.0, 2.0}, {1.0, 3.0}, 2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(wasserstein_1d({0.0, 2.0}, {1.0, 3.0}, 1) == doctest::Approx(1.0).epsilon(1e-12));
  // Unequal counts via quantile coupling.
  CHECK(wasserstein_1d({0.0, 1.0}, {0.0, 0.5, 1.0}, 2) == doctest::Approx(0.0));
  CHECK(wasserstein_1d({0.0, 2.0}, {1.0}, 2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(wasserstein_1d({}, {1.0}, 2), ConfigError);
  CHECK_THROWS_AS(wasserstein_1d({1.0}, {1.0}, 3), ConfigError);
}

TEST_CASE("wasserstein metric axioms on random samples") {
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_points(12, 100 + trial);
    const auto b = random_points(12, 200 + trial, 1.4);
    const auto c = random_points(12, 300 + trial, 0.6);
    for (int p : {1, 2}) {
      CHECK(wasserstein_1d(a, a, p) <= 1e-12);
      const double ab = wasserstein_1d(a, b, p);
      CHECK(std::abs(ab - wasserstein_1d(b, a, p)) <= 1e-12);
      CHECK(ab + wasserstein_1d(b, c, p) >= wasserstein_1d(a, c, p) - 1e-10);
    }
  }
}

TEST_CASE("wasserstein equals brute-force optimal transport on small sets") {
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 5;
    const auto a = random_points(n, 400 + trial);
    const auto b = random_points(n, 500 + trial);
    for (int p : {1, 2})
      CHECK(wasserstein_1d(a, b, p) == doctest::Approx(brute_force_w(a, b, p)).epsilon(1e-10));
  }
}

TEST_CASE("sliced wasserstein reduces to the projected 1d value") {
  // All mass along the x axis: any cloud pair differing only in x projects to
  // |dx| * |dir_x|; with two points per cloud the coupling stays sorted.
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 0.0, 2.0, 0.0, 0.0;
  b << 1.0, 3.0, 0.0, 0.0;
  const double got = sliced_wasserstein(a, b, 200, 7, 2);
  // W2 along direction u is |u_x|; average of |u_x| over the circle is 2/pi.
  CHECK(got == doctest::Approx(2.0 / std::numbers::pi).epsilon(0.1));
  CHECK(sliced_wasserstein(a, a, 16, 3, 2) <= 1e-12);
  CHECK(sliced_wasserstein(a, b, 64, 11, 2) == sliced_wasserstein(a, b, 64, 11, 2));
}

TEST_CASE("chaos diagnostic: trivial single-rung ladder") {
  auto run = [](int n, std::uint64_t seed) {
    Eigen::MatrixXd x(1, n);
    for (int i = 0; i < n; ++i) x(0, i) = rng::normal(seed, i);
    return x;
  };
  const auto rows = chaos_diagnostic(run, {64}, 1, 5);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].num_particles == 64);
  CHECK(rows[0].mean_w2 <= 1e-14);
}

TEST_CASE("chaos diagnostic: iid sampling fluctuation decreases in N") {
  // Non-interacting particles: terminal measure is just an iid gaussian
  // sample, so W2 to the big reference shrinks like N^{-1/2}.
  auto run = [](int n, std::uint64_t seed) {
    Eigen::MatrixXd x(1, n);
    for (int i = 0; i < n; ++i) x(0, i) = rng::normal(seed, i);
    return x;
  };
  const auto rows = chaos_diagnostic(run, {64, 256, 1024, 8192}, 20, 11);
  CHECK(rows[0].mean_w2 > rows[1].mean_w2);
  CHECK(rows[1].mean_w2 > rows[2].mean_w2);
  CHECK_THROWS_AS(chaos_diagnostic(run, {64, 64}, 2, 1), ConfigError);
}
