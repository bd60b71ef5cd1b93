#ifndef MEANFIELD_DYNAMICS_HPP
#define MEANFIELD_DYNAMICS_HPP

#include <cstdint>
#include <functional>

#include "meanfield/system.hpp"

namespace meanfield {

// drift_i = (1/N) sum_j phi(|X^j - X^i|) (X^j - X^i); the j = i term is zero.
Eigen::MatrixXd pairwise_drift(const ParticleState& state, const KernelSpec& kernel);

// Motsch-Tadmor: same numerator, normalized by sum_k phi(|X^k - X^i|).
Eigen::MatrixXd motsch_tadmor_drift(const ParticleState& state, const KernelSpec& kernel);

// accel_i = (1/N) sum_j phi(|X^j - X^i|) (V^j - V^i).
Eigen::MatrixXd cucker_smale_accel(const ParticleState& state, const KernelSpec& kernel);

// Hierarchical multigroup drift with the 1/(N_l - delta_{k,l}) normalizer and
// the self-pair excluded. Returns a d x N array over all groups in block order.
Eigen::MatrixXd multigroup_drift(const ParticleState& state, const MultigroupSpec& mg);

// Drift (first-order) or acceleration (second-order) for the spec's form.
Eigen::MatrixXd eval_drift(const SystemSpec& spec, const ParticleState& state);

// One forward Euler / Euler-Maruyama step. Second-order systems update the
// position with the pre-step velocity. Noise is drawn from the counter RNG
// keyed on (seed, trajectory, step, particle, coordinate).
struct StepNoiseKey {
  std::uint64_t seed = 0;
  std::uint64_t trajectory = 0;
  long step = 0;
};

using DriftFn = std::function<Eigen::MatrixXd(const ParticleState&)>;

ParticleState step(const ParticleState& state, const DriftFn& drift_fn, Order order,
                   double sigma, double dt, const StepNoiseKey& key);

// Coordinates beyond this magnitude abort the simulation.
inline constexpr double kBlowupLimit = 1e6;

Trajectory simulate(const SystemSpec& spec, const ParticleState& init, long num_steps,
                    double dt, std::uint64_t seed, std::uint64_t trajectory_index = 0);

}  // namespace meanfield

#endif
