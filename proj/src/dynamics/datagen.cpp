#include "ninn/dynamics/datagen.hpp"

#include "ninn/parallel.hpp"

#include <cmath>

namespace ninn::dynamics {

Vector gaussian_state(int dim, double mean, double std_dev, Rng& rng) {
    std::normal_distribution<double> normal(mean, std_dev);
    Vector x(dim);
    for (int i = 0; i < dim; ++i) x[i] = normal(rng);
    return x;
}

training::Dataset make_training_set(const OdeSpec& spec, std::size_t n_samples, double dt_step, Rng& rng,
                                    const TrainingSetOptions& options) {
    if (n_samples == 0) throw std::invalid_argument("make_training_set: n_samples must be positive");
    if (!(dt_step > 0.0)) throw std::invalid_argument("make_training_set: dt_step must be positive");
    if (options.pairs_per_trajectory < 1 || options.stride < 1)
        throw std::invalid_argument("make_training_set: pairs_per_trajectory and stride must be >= 1");
    spec.validate();
    const double inner_dt = dt_step / 10.0;
    training::Dataset data;
    data.dt_step = dt_step;
    while (data.size() < n_samples) {
        try {
            Vector u = advance(spec, gaussian_state(spec.dim(), 0.0, options.ic_std, rng), options.burn_in, inner_dt);
            double t = options.burn_in;
            std::vector<double> times;
            std::vector<Vector> inputs, targets;
            for (int p = 0; p < options.pairs_per_trajectory && data.size() + inputs.size() < n_samples; ++p) {
                Vector next = advance(spec, u, dt_step, inner_dt);
                times.push_back(t);
                inputs.push_back(u);
                targets.push_back(next);
                u = std::move(next);
                t += dt_step;
                for (int s = 1; s < options.stride; ++s) {
                    u = advance(spec, u, dt_step, inner_dt);
                    t += dt_step;
                }
            }
            data.times.insert(data.times.end(), times.begin(), times.end());
            data.inputs.insert(data.inputs.end(), inputs.begin(), inputs.end());
            data.targets.insert(data.targets.end(), targets.begin(), targets.end());
        } catch (const DivergenceError&) {
            // resample the initial condition
        }
    }
    return data;
}

ReferenceProtocol ReferenceProtocol::for_spec(const OdeSpec& spec) {
    ReferenceProtocol p;
    p.horizon = std::holds_alternative<Lorenz96>(spec.model) ? 120.0 : 110.0;
    return p;
}

std::size_t ReferenceProtocol::checkpoint_count() const {
    return static_cast<std::size_t>(std::lround((horizon - obs_start) / obs_spacing)) + 1;
}

std::vector<ReferenceRun> make_reference_runs(const OdeSpec& spec, std::size_t n_runs, std::uint64_t master_seed,
                                              const ReferenceProtocol& protocol, int jobs) {
    if (n_runs < 1) throw std::invalid_argument("make_reference_runs: n_runs must be >= 1");
    if (!(protocol.horizon >= protocol.obs_start) || !(protocol.obs_spacing > 0.0))
        throw std::invalid_argument("make_reference_runs: invalid protocol horizons");
    spec.validate();
    std::vector<ReferenceRun> runs(n_runs);
    const std::size_t n_checkpoints = protocol.checkpoint_count();
    parallel_for(n_runs, jobs, [&](std::size_t i) {
        Rng rng(derive_seed(master_seed, i));
        ReferenceRun run;
        run.initial_condition = gaussian_state(spec.dim(), 0.0, protocol.ic_std, rng);
        Vector x = advance(spec, run.initial_condition, protocol.obs_start, protocol.dt);
        run.checkpoints.times.push_back(protocol.checkpoint_time(0));
        run.checkpoints.states.push_back(x);
        for (std::size_t k = 1; k < n_checkpoints; ++k) {
            x = advance(spec, x, protocol.obs_spacing, protocol.dt);
            run.checkpoints.times.push_back(protocol.checkpoint_time(k));
            run.checkpoints.states.push_back(x);
        }
        runs[i] = std::move(run);
    });
    return runs;
}

}  // namespace ninn::dynamics
