#pragma once

#include "ninn/assimilation/feedback.hpp"
#include "ninn/assimilation/observation.hpp"
#include "ninn/dynamics/ode.hpp"
#include "ninn/nn/resnet.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ninn::assimilation {

enum class Method { Nudging, Ninn1, Ninn2Plain, Ninn2Lookahead, DirectObs, FreeRun };

[[nodiscard]] std::string to_string(Method method);
/// Accepts "nudging", "ninn1", "ninn2-plain", "ninn2-lookahead", "direct-obs", "free-run".
[[nodiscard]] Method parse_method(const std::string& name);
[[nodiscard]] const std::vector<Method>& all_methods();

/// Substeps per window do not tile the observation spacing.
class ScheduleError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct AssimilationResult {
    dynamics::Trajectory estimates;         // every substep, or checkpoints only when not recorded
    std::vector<double> checkpoint_times;
    std::vector<Vector> checkpoint_states;  // estimate at each observation time
    std::vector<double> checkpoint_errors;  // |estimate - truth|_2, empty without truth
    bool diverged = false;
};

struct AssimilationOptions {
    bool record_substeps = true;
    const std::vector<Vector>* truth = nullptr;  // truth at the stream's observation times
};

/// Classic nudging on the true ODE, dw/dt = f(w) - mu (I_M w - w_obs(t_n)),
/// with the latest observation held fixed across each window and RK4 steps of
/// size dt (which must divide the observation spacing).
[[nodiscard]] AssimilationResult classic_nudging(const dynamics::OdeSpec& spec, const ObservationStream& stream,
                                                 const ObservationOperator& op, double mu, const Vector& w0,
                                                 double dt, const AssimilationOptions& options = {});

/// Marches a learned system window by window; the window's observation is held
/// for schedule.substeps applications with mu_eff = mu exp(-i Lambda).
/// The estimate recorded at an observation time is the state fed to the
/// window's first step (for direct-obs that is the state after insertion).
[[nodiscard]] AssimilationResult run_assimilation(Method method, const nn::ResNetSystem& system,
                                                  const ObservationStream& stream, const ObservationOperator& op,
                                                  const NudgeSchedule& schedule, const Vector& w0,
                                                  const AssimilationOptions& options = {});

/// Iterated system_forward for `steps` steps, with the start state first.
[[nodiscard]] std::vector<Vector> free_run(const nn::ResNetSystem& system, const Vector& w0, int steps);

}  // namespace ninn::assimilation
