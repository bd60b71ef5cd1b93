#include "meanfield/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "meanfield/errors.hpp"
#include "meanfield/rng.hpp"

namespace meanfield {

namespace {

double trapezoid_weight(const Eigen::VectorXd& axis, int i) {
  const int n = static_cast<int>(axis.size());
  if (n < 2) throw ConfigError("density grid axis needs at least 2 points");
  if (i == 0) return 0.5 * (axis(1) - axis(0));
  if (i == n - 1) return 0.5 * (axis(n - 1) - axis(n - 2));
  return 0.5 * (axis(i + 1) - axis(i - 1));
}

// Applies f(flat_index, quadrature_weight) over the tensor grid.
template <typename F>
void for_each_grid_point(const DensityGrid& g, F&& f) {
  if (g.dim() == 1) {
    for (int i = 0; i < g.axes[0].size(); ++i) f(i, trapezoid_weight(g.axes[0], i));
  } else if (g.dim() == 2) {
    const int n1 = static_cast<int>(g.axes[1].size());
    for (int i = 0; i < g.axes[0].size(); ++i) {
      const double wi = trapezoid_weight(g.axes[0], i);
      for (int j = 0; j < n1; ++j) f(i * n1 + j, wi * trapezoid_weight(g.axes[1], j));
    }
  } else {
    throw ConfigError("density grids support 1 or 2 dimensions");
  }
}

}  // namespace

double DensityGrid::integral() const {
  double total = 0.0;
  for_each_grid_point(*this, [&](int idx, double w) { total += w * values(idx); });
  return total;
}

double silverman_bandwidth(const Eigen::MatrixXd& samples) {
  const int d = static_cast<int>(samples.rows());
  const int n = static_cast<int>(samples.cols());
  if (n < 2) throw ConfigError("silverman_bandwidth: need at least 2 samples");
  double sigma_avg = 0.0;
  for (int c = 0; c < d; ++c) {
    const double mean = samples.row(c).mean();
    const double var =
        (samples.row(c).array() - mean).square().sum() / static_cast<double>(n - 1);
    sigma_avg += std::sqrt(var);
  }
  sigma_avg /= static_cast<double>(d);
  if (sigma_avg <= 0.0)
    throw DomainError("silverman_bandwidth: zero-variance samples");
  return std::pow(4.0 / (d + 2.0), 1.0 / (d + 4.0)) *
         std::pow(static_cast<double>(n), -1.0 / (d + 4.0)) * sigma_avg;
}

DensityGrid gaussian_kde(const Eigen::MatrixXd& samples, double bandwidth,
                         const std::vector<Eigen::VectorXd>& axes) {
  const int d = static_cast<int>(samples.rows());
  const int n = static_cast<int>(samples.cols());
  if (n < 1) throw ConfigError("gaussian_kde: no samples");
  if (static_cast<int>(axes.size()) != d)
    throw ShapeError("gaussian_kde: axis count must match sample dimension");
  const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(samples);

  DensityGrid grid;
  grid.axes = axes;
  const double norm =
      1.0 / (static_cast<double>(n) * std::pow(h, d) *
             std::pow(2.0 * std::numbers::pi, d / 2.0));
  const double inv2h2 = 1.0 / (2.0 * h * h);

  if (d == 1) {
    const auto& ax = axes[0];
    grid.values = Eigen::VectorXd::Zero(ax.size());
    for (int g = 0; g < ax.size(); ++g) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        const double dx = ax(g) - samples(0, j);
        acc += std::exp(-dx * dx * inv2h2);
      }
      grid.values(g) = norm * acc;
    }
  } else if (d == 2) {
    const auto& ax0 = axes[0];
    const auto& ax1 = axes[1];
    grid.values = Eigen::VectorXd::Zero(ax0.size() * ax1.size());
    for (int i = 0; i < ax0.size(); ++i) {
      for (int j = 0; j < ax1.size(); ++j) {
        double acc = 0.0;
        for (int s = 0; s < n; ++s) {
          const double dx = ax0(i) - samples(0, s);
          const double dy = ax1(j) - samples(1, s);
          acc += std::exp(-(dx * dx + dy * dy) * inv2h2);
        }
        grid.values(i * ax1.size() + j) = norm * acc;
      }
    }
  } else {
    throw ConfigError("gaussian_kde: supports 1 or 2 dimensions");
  }
  return grid;
}

DensityGrid gaussian_kde_auto_grid(const Eigen::MatrixXd& samples, double bandwidth,
                                   int points_per_axis) {
  const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(samples);
  std::vector<Eigen::VectorXd> axes;
  for (int c = 0; c < samples.rows(); ++c) {
    const double lo = samples.row(c).minCoeff() - 6.0 * h;
    const double hi = samples.row(c).maxCoeff() + 6.0 * h;
    axes.push_back(Eigen::VectorXd::LinSpaced(points_per_axis, lo, hi));
  }
  return gaussian_kde(samples, h, axes);
}

double l2_density_error(const DensityGrid& a, const DensityGrid& b) {
  if (a.dim() != b.dim() || a.values.size() != b.values.size())
    throw ShapeError("l2_density_error: grid mismatch");
  for (int c = 0; c < a.dim(); ++c) {
    if (a.axes[c].size() != b.axes[c].size() || a.axes[c] != b.axes[c])
      throw ShapeError("l2_density_error: grids differ");
  }
  double total = 0.0;
  for_each_grid_point(a, [&](int idx, double w) {
    const double diff = a.values(idx) - b.values(idx);
    total += w * diff * diff;
  });
  return std::sqrt(total);
}

namespace {

// Empirical quantile with linear interpolation at rank u in [0,1].
double quantile(const std::vector<double>& sorted, double u) {
  const int n = static_cast<int>(sorted.size());
  if (n == 1) return sorted[0];
  const double pos = u * (n - 1);
  const int lo = std::min(n - 2, static_cast<int>(pos));
  const double frac = pos - lo;
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

double wasserstein_1d(std::vector<double> a, std::vector<double> b, int p) {
  if (a.empty() || b.empty()) throw ConfigError("wasserstein_1d: empty sample set");
  if (p != 1 && p != 2) throw ConfigError("wasserstein_1d: p must be 1 or 2");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double acc = 0.0;
  if (a.size() == b.size()) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double diff = std::abs(a[i] - b[i]);
      acc += p == 1 ? diff : diff * diff;
    }
    acc /= static_cast<double>(a.size());
  } else {
    const int n = static_cast<int>(std::max(a.size(), b.size()));
    for (int i = 0; i < n; ++i) {
      const double u = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
      const double diff = std::abs(quantile(a, u) - quantile(b, u));
      acc += p == 1 ? diff : diff * diff;
    }
    acc /= static_cast<double>(n);
  }
  return p == 1 ? acc : std::sqrt(acc);
}

double sliced_wasserstein(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int n_proj,
                          std::uint64_t seed, int p) {
  if (a.rows() != b.rows()) throw ShapeError("sliced_wasserstein: dimension mismatch");
  if (n_proj < 1) throw ConfigError("sliced_wasserstein: need at least one projection");
  const int d = static_cast<int>(a.rows());
  rng::Stream stream(seed);
  double total = 0.0;
  for (int t = 0; t < n_proj; ++t) {
    Eigen::VectorXd dir(d);
    do {
      for (int c = 0; c < d; ++c) dir(c) = stream.normal();
    } while (dir.norm() == 0.0);
    dir.normalize();
    std::vector<double> pa(a.cols()), pb(b.cols());
    for (int j = 0; j < a.cols(); ++j) pa[j] = dir.dot(a.col(j));
    for (int j = 0; j < b.cols(); ++j) pb[j] = dir.dot(b.col(j));
    total += wasserstein_1d(std::move(pa), std::move(pb), p);
  }
  return total / static_cast<double>(n_proj);
}

std::vector<ChaosRow> chaos_diagnostic(const TerminalFn& run,
                                       const std::vector<int>& n_ladder, int n_rep,
                                       std::uint64_t seed, int n_proj) {
  if (n_ladder.empty()) throw ConfigError("chaos_diagnostic: empty ladder");
  for (std::size_t i = 1; i < n_ladder.size(); ++i)
    if (n_ladder[i] <= n_ladder[i - 1])
      throw ConfigError("chaos_diagnostic: ladder must be strictly ascending");
  if (n_rep < 1) throw ConfigError("chaos_diagnostic: need at least one replicate");

  // Reference: one run at the largest N, proxy for the mean-field law. It
  // shares the seed of the top rung's first replicate, so a single-rung
  // ladder measures a run against itself.
  const int n_ref = n_ladder.back();
  const Eigen::MatrixXd reference = run(n_ref, rng::mix(seed, static_cast<std::uint64_t>(n_ref), 0));
  const int d = static_cast<int>(reference.rows());

  auto distance = [&](const Eigen::MatrixXd& x) {
    if (d == 1) {
      std::vector<double> xa(x.data(), x.data() + x.cols());
      std::vector<double> rb(reference.data(), reference.data() + reference.cols());
      return wasserstein_1d(std::move(xa), std::move(rb), 2);
    }
    return sliced_wasserstein(x, reference, n_proj, rng::mix(seed, 0x51CE), 2);
  };

  std::vector<ChaosRow> rows;
  for (int n : n_ladder) {
    double total = 0.0;
    for (int r = 0; r < n_rep; ++r)
      total += distance(run(n, rng::mix(seed, static_cast<std::uint64_t>(n), r)));
    rows.push_back({n, total / static_cast<double>(n_rep)});
  }
  return rows;
}

}  // namespace meanfield
