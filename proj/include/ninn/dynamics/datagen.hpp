#pragma once

#include "ninn/dynamics/ode.hpp"
#include "ninn/training/dataset.hpp"

#include <cstdint>
#include <random>

namespace ninn::dynamics {

using Rng = std::mt19937_64;

/// Per-job seed derived from a master seed.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) { return master ^ index; }

/// Gaussian state with independent N(mean, std^2) components.
[[nodiscard]] Vector gaussian_state(int dim, double mean, double std_dev, Rng& rng);

struct TrainingSetOptions {
    double burn_in = 20.0;
    double ic_std = 10.0;
    int pairs_per_trajectory = 1000;  // harvest this many pairs before drawing a new IC
    int stride = 1;                   // dt_step multiples between harvested pairs
};

/// Pairs (u(t), u(t + dt_step)) harvested along on-attractor trajectories.
/// The inner RK4 step is dt_step / 10.
[[nodiscard]] training::Dataset make_training_set(const OdeSpec& spec, std::size_t n_samples, double dt_step,
                                                  Rng& rng, const TrainingSetOptions& options = {});

struct ReferenceProtocol {
    double obs_start = 100.0;
    double horizon = 110.0;  // 110 for Lorenz 63, 120 for Lorenz 96
    double obs_spacing = 0.1;
    double ic_std = 10.0;
    double dt = 1e-3;

    [[nodiscard]] static ReferenceProtocol for_spec(const OdeSpec& spec);
    [[nodiscard]] std::size_t checkpoint_count() const;
    [[nodiscard]] double checkpoint_time(std::size_t k) const {
        return obs_start + static_cast<double>(k) * obs_spacing;
    }
};

struct ReferenceRun {
    Vector initial_condition;
    Trajectory checkpoints;  // truth at obs_start, obs_start + spacing, ..., horizon
};

/// Run i draws its IC from derive_seed(master_seed, i).
[[nodiscard]] std::vector<ReferenceRun> make_reference_runs(const OdeSpec& spec, std::size_t n_runs,
                                                            std::uint64_t master_seed,
                                                            const ReferenceProtocol& protocol, int jobs = 1);

}  // namespace ninn::dynamics
