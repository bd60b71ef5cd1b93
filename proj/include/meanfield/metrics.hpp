#ifndef MEANFIELD_METRICS_HPP
#define MEANFIELD_METRICS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "meanfield/system.hpp"

namespace meanfield {

// Uniform tensor grid with per-point density values. 1D grids have a single
// axis; 2D grids store values row-major over (axis0, axis1).
struct DensityGrid {
  std::vector<Eigen::VectorXd> axes;
  Eigen::VectorXd values;

  int dim() const { return static_cast<int>(axes.size()); }
  double integral() const;  // trapezoidal mass
};

// Silverman's rule: (4/(d+2))^{1/(d+4)} * N^{-1/(d+4)} * sigma_hat, with the
// per-dimension sample standard deviations averaged.
double silverman_bandwidth(const Eigen::MatrixXd& samples);

// Isotropic Gaussian KDE evaluated on the given axes; samples are d x N.
// Pass bandwidth <= 0 for Silverman auto selection.
DensityGrid gaussian_kde(const Eigen::MatrixXd& samples, double bandwidth,
                         const std::vector<Eigen::VectorXd>& axes);

// Convenience: uniform axes spanning the samples plus 6 bandwidths of margin.
DensityGrid gaussian_kde_auto_grid(const Eigen::MatrixXd& samples, double bandwidth,
                                   int points_per_axis);

// sqrt of the trapezoidal integral of (a - b)^2; grids must match.
double l2_density_error(const DensityGrid& a, const DensityGrid& b);

// Sorted-coupling W_p between 1D sample sets; unequal counts are coupled via
// linear interpolation of empirical quantiles at max(n_a, n_b) ranks.
double wasserstein_1d(std::vector<double> a, std::vector<double> b, int p);

// Average of 1D W_p over uniformly random unit projection directions.
double sliced_wasserstein(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int n_proj,
                          std::uint64_t seed, int p = 2);

// Terminal-measure convergence ladder: for each N, the mean (over replicates)
// W2 between the terminal empirical measure and the reference system's
// terminal measure at the largest N. 1D uses exact W2, higher d sliced W2.
struct ChaosRow {
  int num_particles = 0;
  double mean_w2 = 0.0;
};

// Rolls out `run(N, replicate_seed)` -> terminal positions (d x N).
using TerminalFn =
    std::function<Eigen::MatrixXd(int num_particles, std::uint64_t replicate_seed)>;

std::vector<ChaosRow> chaos_diagnostic(const TerminalFn& run,
                                       const std::vector<int>& n_ladder, int n_rep,
                                       std::uint64_t seed, int n_proj = 64);

}  // namespace meanfield

#endif
