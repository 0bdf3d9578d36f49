#include "ninn/dynamics/ode.hpp"

#include <cmath>

namespace ninn::dynamics {

int OdeSpec::dim() const {
    if (const auto* l96 = std::get_if<Lorenz96>(&model)) return l96->dim;
    return 3;
}

std::string OdeSpec::name() const { return std::holds_alternative<Lorenz63>(model) ? "lorenz63" : "lorenz96"; }

void OdeSpec::validate() const {
    if (const auto* l96 = std::get_if<Lorenz96>(&model); l96 && l96->dim < 4)
        throw std::invalid_argument("Lorenz 96 needs dim >= 4");
}

Vector rhs(const OdeSpec& spec, const Vector& x) {
    if (x.size() != spec.dim()) throw DimensionError("rhs: state has wrong dimension");
    if (const auto* l63 = std::get_if<Lorenz63>(&spec.model)) {
        Vector dx(3);
        dx[0] = l63->sigma * (x[1] - x[0]);
        dx[1] = x[0] * (l63->rho - x[2]) - x[1];
        dx[2] = x[0] * x[1] - l63->beta * x[2];
        return dx;
    }
    const auto& l96 = std::get<Lorenz96>(spec.model);
    const int d = l96.dim;
    Vector dx(d);
    for (int i = 0; i < d; ++i) {
        const double xp1 = x[(i + 1) % d];
        const double xm1 = x[(i - 1 + d) % d];
        const double xm2 = x[(i - 2 + d) % d];
        dx[i] = (xp1 - xm2) * xm1 - x[i] + l96.forcing;
    }
    return dx;
}

Vector rk4_step(const OdeSpec& spec, const Vector& x, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
    Vector next = rk4_step([&spec](const Vector& v) { return rhs(spec, v); }, x, dt);
    if (!next.allFinite()) throw DivergenceError("rk4_step: non-finite state");
    return next;
}

long steps_for(double span, double dt) {
    if (span <= 0.0) return 0;
    return std::max(1L, std::lround(std::ceil(span / dt - 1e-9)));
}

IntegrationResult integrate(const OdeSpec& spec, const Vector& x0, double t0, double t1,
                            const IntegratorConfig& config) {
    if (!(config.dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
    if (t1 < t0) throw std::invalid_argument("integrate: t1 must not precede t0");
    IntegrationResult result;
    const long steps = steps_for(t1 - t0, config.dt);
    const double h = steps > 0 ? (t1 - t0) / static_cast<double>(steps) : config.dt;
    result.trajectory.times.reserve(static_cast<std::size_t>(steps + 1));
    result.trajectory.states.reserve(static_cast<std::size_t>(steps + 1));
    result.trajectory.times.push_back(t0);
    result.trajectory.states.push_back(x0);
    Vector x = x0;
    for (long k = 1; k <= steps; ++k) {
        try {
            x = rk4_step(spec, x, h);
        } catch (const DivergenceError& e) {
            result.error = std::string(e.what()) + " at step " + std::to_string(k);
            break;
        }
        result.trajectory.times.push_back(t0 + static_cast<double>(k) * h);
        result.trajectory.states.push_back(x);
    }
    return result;
}

Vector advance(const OdeSpec& spec, const Vector& x, double span, double dt) {
    const long steps = steps_for(span, dt);
    if (steps == 0) return x;
    const double h = span / static_cast<double>(steps);
    Vector y = x;
    for (long k = 0; k < steps; ++k) y = rk4_step(spec, y, h);
    return y;
}

}  // namespace ninn::dynamics
