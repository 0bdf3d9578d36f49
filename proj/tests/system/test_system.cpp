// Properties of a trained Lorenz 63 system. One system is trained per process.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ninn/assimilation/runner.hpp"
#include "ninn/dynamics/datagen.hpp"
#include "ninn/eval/protocol.hpp"
#include "ninn/training/trainer.hpp"

#include <algorithm>
#include <cmath>

using namespace ninn;
using namespace ninn::assimilation;

namespace {

struct Fixture {
    training::Dataset data;
    training::TrainConfig config;
    training::TrainedSystem trained;
    std::vector<dynamics::ReferenceRun> truth;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture out;
        dynamics::Rng rng(101);
        out.data = dynamics::make_training_set(dynamics::OdeSpec{}, 2000, 0.01, rng);
        nn::ResNetSystem shape;
        shape.state_dim = 3;
        shape.stencils = nn::ResNetSystem::full_stencils(3);
        shape.nets.assign(3, nn::ResNetParams::zeros(3, 1, 6, 15));  // 5 hidden layers
        out.config.max_iters = 500;
        out.config.seed = 5;
        out.trained = training::train_system(shape, out.data, out.config, 3);
        dynamics::ReferenceProtocol p;
        p.horizon = 105;
        out.truth = dynamics::make_reference_runs(dynamics::OdeSpec{}, 5, 9, p);
        return out;
    }();
    return f;
}

struct Windows {
    AssimilationResult run;
    AssimilationResult free;
};

Windows from_truth(Method m, const ObservationOperator& op, double mu, std::size_t n) {
    const auto& f = fixture();
    const auto stream = make_stream(f.truth[n].checkpoints, op);
    AssimilationOptions o;
    o.record_substeps = false;
    o.truth = &f.truth[n].checkpoints.states;
    const Vector& w0 = f.truth[n].checkpoints.states[0];
    return {run_assimilation(m, f.trained.system, stream, op, {mu, 0, 10}, w0, o),
            run_assimilation(Method::FreeRun, f.trained.system, stream, op, {0, 0, 10}, w0, o)};
}

}  // namespace

TEST_CASE("one-step validation error is below 1e-2 of the state scale") {
    const auto& f = fixture();
    const auto [train, val] = training::split_indices(f.data.size(), f.config.split_fraction, f.config.seed);
    double err = 0, scale = 0;
    for (auto i : val) {
        err += (nn::system_forward(f.trained.system, f.data.inputs[i]) - f.data.targets[i]).squaredNorm();
        scale += f.data.targets[i].squaredNorm();
    }
    const double rms = std::sqrt(err / static_cast<double>(val.size() * 3));
    const double state = std::sqrt(scale / static_cast<double>(val.size() * 3));
    MESSAGE("validation rms " << rms << ", state scale " << state);
    CHECK(rms < 1e-2 * state);
    for (const auto& h : f.trained.histories) CHECK_FALSE(h.diverged);
}

TEST_CASE("direct observation is exact at the truth under full observation") {
    const auto op = ObservationOperator::all(3);
    for (std::size_t n = 0; n < 5; ++n) {
        const auto w = from_truth(Method::DirectObs, op, 1.0, n);
        for (double e : w.run.checkpoint_errors) CHECK(e == 0.0);
    }
}

TEST_CASE("feedback methods stay near the free run one window from the truth" * doctest::may_fail()) {
    const auto op = ObservationOperator::all(3);
    for (Method m : {Method::Ninn1, Method::Ninn2Lookahead}) {
        for (std::size_t n = 0; n < 5; ++n) {
            const auto w = from_truth(m, op, 1.0, n);
            const double a = w.run.checkpoint_errors[1];
            const double b = w.free.checkpoint_errors[1];
            INFO(to_string(m) << " run " << n << ": " << a << " vs free " << b);
            CHECK(a <= 5 * b);
        }
    }
}

TEST_CASE("checkpoint error contracts from a wrong initial condition" * doctest::may_fail()) {
    const auto& f = fixture();
    const auto op = ObservationOperator::all(3);
    double floor = 0;
    for (std::size_t n = 0; n < 5; ++n) floor = std::max(floor, from_truth(Method::FreeRun, op, 0, n).free.checkpoint_errors[1]);
    for (Method m : {Method::Ninn1, Method::Ninn2Lookahead}) {
        const auto stream = make_stream(f.truth[0].checkpoints, op);
        AssimilationOptions o;
        o.record_substeps = false;
        o.truth = &f.truth[0].checkpoints.states;
        const Vector w0 = eval::wrong_initial_condition(3, 10.0, 3, 0);
        const auto r = run_assimilation(m, f.trained.system, stream, op, {1.0, 0, 10}, w0, o);
        const auto& e = r.checkpoint_errors;
        for (std::size_t k = 0; k + 1 < e.size() && e[k] > 2 * floor; ++k) {
            INFO(to_string(m) << " k " << k << ": " << e[k] << " -> " << e[k + 1] << ", floor " << floor);
            CHECK(e[k + 1] <= 1.2 * e[k]);
        }
    }
}

TEST_CASE("zero gain reproduces the free run from the truth") {
    const auto op = ObservationOperator({0}, 3);
    for (Method m : {Method::Ninn1, Method::Ninn2Plain, Method::Ninn2Lookahead}) {
        const auto w = from_truth(m, op, 0.0, 0);
        CHECK(w.run.checkpoint_errors == w.free.checkpoint_errors);
    }
}
