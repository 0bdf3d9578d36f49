#include "ninn/assimilation/runner.hpp"

#include <cmath>
#include <limits>

namespace ninn::assimilation {

std::string to_string(Method method) {
    switch (method) {
        case Method::Nudging: return "nudging";
        case Method::Ninn1: return "ninn1";
        case Method::Ninn2Plain: return "ninn2-plain";
        case Method::Ninn2Lookahead: return "ninn2-lookahead";
        case Method::DirectObs: return "direct-obs";
        case Method::FreeRun: return "free-run";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    for (Method m : all_methods())
        if (to_string(m) == name) return m;
    throw std::invalid_argument("unknown assimilation method '" + name + "'");
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods{Method::Nudging,        Method::Ninn1,     Method::Ninn2Plain,
                                             Method::Ninn2Lookahead, Method::DirectObs, Method::FreeRun};
    return methods;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

// Integer number of steps of size `step` in `span`, or throws ScheduleError.
int tile(double span, double step, const char* what) {
    const double ratio = span / step;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
        throw ScheduleError(std::string(what) + " does not divide the observation spacing");
    return static_cast<int>(rounded);
}

class Recorder {
public:
    Recorder(const ObservationStream& stream, const AssimilationOptions& options, int state_dim)
        : stream_(stream), options_(options), dim_(state_dim) {
        if (options.truth && options.truth->size() != stream.entries.size())
            throw DimensionError("truth and observation stream differ in length");
    }

    void substep(double t, const Vector& w) {
        if (!options_.record_substeps) return;
        result.estimates.times.push_back(t);
        result.estimates.states.push_back(w);
    }

    void checkpoint(std::size_t k, const Vector& w) {
        result.checkpoint_times.push_back(stream_.entries[k].time);
        result.checkpoint_states.push_back(w);
        if (options_.truth) {
            const double err = w.allFinite() ? (w - (*options_.truth)[k]).norm() : kInf;
            result.checkpoint_errors.push_back(err);
        }
        if (!options_.record_substeps) {
            result.estimates.times.push_back(stream_.entries[k].time);
            result.estimates.states.push_back(w);
        }
    }

    // Marks the run diverged: checkpoints from `first_missing` on and substeps
    // after `t_last` are filled with NaN.
    void diverge(std::size_t first_missing, double t_last, double dt) {
        result.diverged = true;
        const Vector bad = Vector::Constant(dim_, kNaN);
        for (std::size_t j = first_missing; j < stream_.entries.size(); ++j) checkpoint(j, bad);
        if (options_.record_substeps) {
            const auto remaining = std::llround((stream_.entries.back().time - t_last) / dt);
            for (long long s = 1; s <= remaining; ++s) substep(t_last + static_cast<double>(s) * dt, bad);
        }
    }

    AssimilationResult result;

private:
    const ObservationStream& stream_;
    const AssimilationOptions& options_;
    int dim_;
};

}  // namespace

AssimilationResult classic_nudging(const dynamics::OdeSpec& spec, const ObservationStream& stream,
                                   const ObservationOperator& op, double mu, const Vector& w0, double dt,
                                   const AssimilationOptions& options) {
    stream.validate();
    if (stream.entries.empty()) throw std::invalid_argument("classic_nudging: empty observation stream");
    if (w0.size() != spec.dim() || op.state_dim() != spec.dim())
        throw DimensionError("classic_nudging: state, operator and ODE dimensions differ");
    const int steps = tile(stream.delta_t_obs, dt, "nudging dt");
    const double h = stream.delta_t_obs / steps;

    Recorder rec(stream, options, spec.dim());
    Vector w = w0;
    rec.substep(stream.entries.front().time, w);
    for (std::size_t k = 0; k < stream.entries.size(); ++k) {
        rec.checkpoint(k, w);
        if (k + 1 == stream.entries.size()) break;
        const Vector held = op.embed(stream.entries[k].values);
        const auto field = [&](const Vector& x) -> Vector {
            return dynamics::rhs(spec, x) - mu * (op.project(x) - held);
        };
        for (int s = 1; s <= steps; ++s) {
            w = dynamics::rk4_step(field, w, h);
            const double ts = stream.entries[k].time + s * h;
            if (!w.allFinite()) {
                rec.diverge(k + 1, ts - h, h);
                return std::move(rec.result);
            }
            rec.substep(ts, w);
        }
    }
    return std::move(rec.result);
}

AssimilationResult run_assimilation(Method method, const nn::ResNetSystem& system, const ObservationStream& stream,
                                    const ObservationOperator& op, const NudgeSchedule& schedule, const Vector& w0,
                                    const AssimilationOptions& options) {
    if (method == Method::Nudging)
        throw std::invalid_argument("run_assimilation: nudging runs on the ODE; use classic_nudging");
    schedule.validate();
    stream.validate();
    if (stream.entries.empty()) throw std::invalid_argument("run_assimilation: empty observation stream");
    if (w0.size() != system.state_dim || op.state_dim() != system.state_dim)
        throw DimensionError("run_assimilation: state, operator and system dimensions differ");
    if (tile(stream.delta_t_obs, system.dt_step, "system dt_step") != schedule.substeps)
        throw ScheduleError("substeps x dt_step (" + std::to_string(schedule.substeps) + " x " +
                            std::to_string(system.dt_step) + ") does not equal the observation spacing " +
                            std::to_string(stream.delta_t_obs));

    Recorder rec(stream, options, system.state_dim);
    Vector w = w0;
    const double dt = system.dt_step;
    for (std::size_t k = 0; k < stream.entries.size(); ++k) {
        const auto& entry = stream.entries[k];
        if (method == Method::DirectObs) w = op.insert(w, entry.values);
        rec.checkpoint(k, w);
        if (k == 0) rec.substep(entry.time, w);
        if (k + 1 == stream.entries.size()) break;
        for (int i = 0; i < schedule.substeps; ++i) {
            const double mu_eff = schedule.effective_mu(i);
            const double t_next = entry.time + (i + 1) * dt;
            try {
                switch (method) {
                    case Method::Ninn1: w = ninn_type1_step(system, w, entry.values, op, mu_eff); break;
                    case Method::Ninn2Plain:
                        w = ninn_type2_step(system, w, entry.values, op, mu_eff, Type2Variant::Plain);
                        break;
                    case Method::Ninn2Lookahead:
                        w = ninn_type2_step(system, w, entry.values, op, mu_eff, Type2Variant::Lookahead);
                        break;
                    case Method::DirectObs:
                    case Method::FreeRun:
                    case Method::Nudging: w = nn::system_forward(system, w); break;
                }
            } catch (const DivergenceError&) {
                rec.diverge(k + 1, t_next - dt, dt);
                return std::move(rec.result);
            }
            if (method == Method::DirectObs && i + 1 == schedule.substeps)
                rec.substep(t_next, op.insert(w, stream.entries[k + 1].values));
            else
                rec.substep(t_next, w);
        }
    }
    return std::move(rec.result);
}

std::vector<Vector> free_run(const nn::ResNetSystem& system, const Vector& w0, int steps) {
    std::vector<Vector> out{w0};
    for (int s = 0; s < steps; ++s) out.push_back(nn::system_forward(system, out.back()));
    return out;
}

}  // namespace ninn::assimilation
