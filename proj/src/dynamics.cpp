#include "meanfield/dynamics.hpp"

#include <cmath>

#include "meanfield/errors.hpp"
#include "meanfield/rng.hpp"

namespace meanfield {

double eval_kernel(const KernelSpec& spec, double r) {
  if (r < 0.0) throw DomainError("eval_kernel: negative radius");
  return std::visit(
      [r](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, GaussianKernel>) {
          const double s = r / k.length;
          return std::exp(-s * s);
        } else if constexpr (std::is_same_v<T, AttractionRepulsionKernel>) {
          const double sr = r / k.l_rep;
          const double sa = r / k.l_att;
          return k.c_rep * std::exp(-sr * sr) - k.c_att * std::exp(-sa * sa);
        } else {
          const double s = r / k.radius;
          if (s >= 1.0) return 0.0;
          const double sp = std::pow(s, k.exponent);
          return k.strength * std::exp(1.0 - 1.0 / (1.0 - sp));
        }
      },
      spec);
}

void SystemSpec::validate() const {
  if (dimension < 1) throw ConfigError("system: dimension must be >= 1");
  if (sigma < 0.0) throw ConfigError("invalid sigma");
  std::visit(
      [](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, GaussianKernel>) {
          if (k.length <= 0.0) throw ConfigError("kernel: length must be positive");
        } else if constexpr (std::is_same_v<T, AttractionRepulsionKernel>) {
          if (k.l_rep <= 0.0 || k.l_att <= 0.0)
            throw ConfigError("kernel: length scales must be positive");
        } else {
          if (k.radius <= 0.0) throw ConfigError("kernel: radius must be positive");
          if (k.exponent < 2 || k.exponent % 2 != 0)
            throw ConfigError("kernel: exponent must be even positive");
        }
      },
      kernel);
  if (drift_form == DriftForm::kMultigroup) {
    if (!multigroup) throw ConfigError("system: multigroup form needs group spec");
    const auto& mg = *multigroup;
    const int k = static_cast<int>(mg.group_sizes.size());
    if (k < 1) throw ConfigError("multigroup: need at least one group");
    for (int n : mg.group_sizes)
      if (n < 1) throw ConfigError("multigroup: group sizes must be >= 1");
    if (mg.influence.rows() != k || mg.influence.cols() != k)
      throw ConfigError("multigroup: influence matrix must be K x K");
    if (!mg.influence.allFinite()) throw ConfigError("multigroup: influence must be finite");
    if (static_cast<int>(mg.radii.size()) != k)
      throw ConfigError("multigroup: need one radius per group");
    for (double r : mg.radii)
      if (r <= 0.0) throw ConfigError("multigroup: radii must be positive");
  }
  if (drift_form == DriftForm::kCuckerSmale && order != Order::kSecond)
    throw ConfigError("cucker_smale requires a second-order system");
}

namespace {

// Small fixed-capacity coordinate buffer; drifts are evaluated pair by pair
// and must not allocate in the inner loop.
constexpr int kMaxDim = 16;

void check_dim(int d) {
  if (d > kMaxDim) throw ShapeError("drift evaluation supports dimension <= 16");
}

}  // namespace

Eigen::MatrixXd pairwise_drift(const ParticleState& state, const KernelSpec& kernel) {
  const int n = state.num_particles();
  if (n == 0) throw ShapeError("pairwise_drift: empty state");
  const auto& x = state.positions;
  const int d = state.dim();
  check_dim(d);
  Eigen::MatrixXd drift = Eigen::MatrixXd::Zero(d, n);
  double diff[kMaxDim];
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double r2 = 0.0;
      for (int c = 0; c < d; ++c) {
        diff[c] = x(c, j) - x(c, i);
        r2 += diff[c] * diff[c];
      }
      const double w = eval_kernel(kernel, std::sqrt(r2));
      for (int c = 0; c < d; ++c) drift(c, i) += w * diff[c];
    }
    drift.col(i) /= static_cast<double>(n);
  }
  return drift;
}

Eigen::MatrixXd motsch_tadmor_drift(const ParticleState& state, const KernelSpec& kernel) {
  const int n = state.num_particles();
  if (n == 0) throw ShapeError("motsch_tadmor_drift: empty state");
  const auto& x = state.positions;
  const int d = state.dim();
  check_dim(d);
  Eigen::MatrixXd drift = Eigen::MatrixXd::Zero(d, n);
  double diff[kMaxDim];
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      double r2 = 0.0;
      for (int c = 0; c < d; ++c) {
        diff[c] = x(c, j) - x(c, i);
        r2 += diff[c] * diff[c];
      }
      const double w = eval_kernel(kernel, std::sqrt(r2));
      total += w;
      for (int c = 0; c < d; ++c) drift(c, i) += w * diff[c];
    }
    if (total <= 0.0) throw DomainError("motsch_tadmor_drift: zero total interaction strength");
    drift.col(i) /= total;
  }
  return drift;
}

Eigen::MatrixXd cucker_smale_accel(const ParticleState& state, const KernelSpec& kernel) {
  if (!state.velocities) throw ShapeError("cucker_smale_accel: state has no velocities");
  const int n = state.num_particles();
  if (n == 0) throw ShapeError("cucker_smale_accel: empty state");
  const auto& x = state.positions;
  const auto& v = *state.velocities;
  const int d = state.dim();
  check_dim(d);
  Eigen::MatrixXd accel = Eigen::MatrixXd::Zero(d, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double r2 = 0.0;
      for (int c = 0; c < d; ++c) {
        const double dx = x(c, j) - x(c, i);
        r2 += dx * dx;
      }
      const double w = eval_kernel(kernel, std::sqrt(r2));
      for (int c = 0; c < d; ++c) accel(c, i) += w * (v(c, j) - v(c, i));
    }
    accel.col(i) /= static_cast<double>(n);
  }
  return accel;
}

Eigen::MatrixXd multigroup_drift(const ParticleState& state, const MultigroupSpec& mg) {
  const int num_groups = static_cast<int>(mg.group_sizes.size());
  std::vector<int> offsets(num_groups + 1, 0);
  for (int g = 0; g < num_groups; ++g) offsets[g + 1] = offsets[g] + mg.group_sizes[g];
  if (offsets.back() != state.num_particles())
    throw ShapeError("multigroup_drift: group sizes do not match particle count");
  for (int g = 0; g < num_groups; ++g) {
    if (mg.group_sizes[g] == 1 && mg.influence(g, g) != 0.0)
      throw DomainError("multigroup_drift: single-agent group with nonzero self-interaction");
  }

  const auto& x = state.positions;
  const int d = state.dim();
  check_dim(d);
  Eigen::MatrixXd drift = Eigen::MatrixXd::Zero(d, x.cols());
  double diff[kMaxDim];
  double acc[kMaxDim];
  for (int k = 0; k < num_groups; ++k) {
    for (int i = offsets[k]; i < offsets[k + 1]; ++i) {
      for (int l = 0; l < num_groups; ++l) {
        if (mg.influence(k, l) == 0.0) continue;
        const CompactBumpKernel kern{mg.influence(k, l), mg.radii[l], mg.exponent};
        const double norm = static_cast<double>(mg.group_sizes[l] - (k == l ? 1 : 0));
        for (int c = 0; c < d; ++c) acc[c] = 0.0;
        for (int j = offsets[l]; j < offsets[l + 1]; ++j) {
          if (j == i) continue;
          double r2 = 0.0;
          for (int c = 0; c < d; ++c) {
            diff[c] = x(c, i) - x(c, j);
            r2 += diff[c] * diff[c];
          }
          const double r = std::sqrt(r2);
          if (r >= mg.radii[l]) continue;
          const double w = eval_kernel(kern, r);
          for (int c = 0; c < d; ++c) acc[c] += w * diff[c];
        }
        for (int c = 0; c < d; ++c) drift(c, i) += mg.sign / norm * acc[c];
      }
    }
  }
  return drift;
}

Eigen::MatrixXd eval_drift(const SystemSpec& spec, const ParticleState& state) {
  switch (spec.drift_form) {
    case DriftForm::kPairwisePosition:
      return pairwise_drift(state, spec.kernel);
    case DriftForm::kMotschTadmor:
      return motsch_tadmor_drift(state, spec.kernel);
    case DriftForm::kCuckerSmale:
      return cucker_smale_accel(state, spec.kernel);
    case DriftForm::kMultigroup:
      return multigroup_drift(state, *spec.multigroup);
    case DriftForm::kLearned:
      throw ConfigError("eval_drift: learned trajectories have no ground-truth drift");
  }
  throw ConfigError("eval_drift: unknown drift form");
}

ParticleState step(const ParticleState& state, const DriftFn& drift_fn, Order order,
                   double sigma, double dt, const StepNoiseKey& key) {
  if (dt <= 0.0) throw ConfigError("step: dt must be positive");
  const Eigen::MatrixXd drift = drift_fn(state);
  if (!drift.allFinite()) throw BlowupError("step: non-finite drift", key.step);

  const int n = state.num_particles();
  const int d = state.dim();
  const double noise_scale = sigma * std::sqrt(dt);
  Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(d, n);
  if (sigma > 0.0) {
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < d; ++c)
        noise(c, i) = noise_scale *
                      rng::normal(key.seed, key.trajectory, static_cast<std::uint64_t>(key.step),
                                  static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(c));
  }

  ParticleState next = state;
  if (order == Order::kFirst) {
    next.positions = state.positions + dt * drift + noise;
  } else {
    if (!state.velocities) throw ShapeError("step: second-order state needs velocities");
    next.positions = state.positions + dt * *state.velocities;
    next.velocities = *state.velocities + dt * drift + noise;
  }
  if (next.positions.cwiseAbs().maxCoeff() > kBlowupLimit ||
      (next.velocities && next.velocities->cwiseAbs().maxCoeff() > kBlowupLimit))
    throw BlowupError("step: coordinate exceeded blow-up limit", key.step);
  if (!next.all_finite()) throw BlowupError("step: non-finite state", key.step);
  return next;
}

Trajectory simulate(const SystemSpec& spec, const ParticleState& init, long num_steps,
                    double dt, std::uint64_t seed, std::uint64_t trajectory_index) {
  spec.validate();
  if (init.dim() != spec.dimension) throw ShapeError("simulate: init dimension mismatch");
  if (spec.order == Order::kSecond && !init.velocities)
    throw ShapeError("simulate: second-order system needs initial velocities");

  Trajectory traj;
  traj.spec = spec;
  traj.dt = dt;
  traj.seed = seed;
  traj.states.reserve(num_steps + 1);
  traj.states.push_back(init);
  auto drift_fn = [&spec](const ParticleState& s) { return eval_drift(spec, s); };
  for (long l = 0; l < num_steps; ++l) {
    traj.states.push_back(step(traj.states.back(), drift_fn, spec.order, spec.sigma, dt,
                               {seed, trajectory_index, l}));
  }
  return traj;
}

}  // namespace meanfield
