#pragma once

#include "ninn/common.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ninn::dynamics {

struct Lorenz63 {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
};

struct Lorenz96 {
    double forcing = 10.0;
    int dim = 40;
};

/// Ground-truth ODE right-hand side selector.
struct OdeSpec {
    std::variant<Lorenz63, Lorenz96> model = Lorenz63{};

    [[nodiscard]] int dim() const;
    [[nodiscard]] std::string name() const;
    void validate() const;
};

/// Times and states on a uniform grid.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;

    [[nodiscard]] std::size_t size() const { return times.size(); }
};

struct IntegratorConfig {
    double dt = 1e-3;
};

[[nodiscard]] Vector rhs(const OdeSpec& spec, const Vector& x);

/// Classical four-stage Runge-Kutta step for an arbitrary vector field.
template <typename Field>
[[nodiscard]] Vector rk4_step(const Field& f, const Vector& x, double dt) {
    const Vector k1 = f(x);
    const Vector k2 = f(x + 0.5 * dt * k1);
    const Vector k3 = f(x + 0.5 * dt * k2);
    const Vector k4 = f(x + dt * k3);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Throws DivergenceError when the update is not finite.
[[nodiscard]] Vector rk4_step(const OdeSpec& spec, const Vector& x, double dt);

/// Number of uniform steps of size ~dt covering a span; the step is shrunk so
/// the grid lands exactly on the end point.
[[nodiscard]] long steps_for(double span, double dt);

struct IntegrationResult {
    Trajectory trajectory;
    std::optional<std::string> error;  // set when the march diverged; trajectory is partial
};

/// Uniform RK4 march from t0 to t1 recording every step.
[[nodiscard]] IntegrationResult integrate(const OdeSpec& spec, const Vector& x0, double t0, double t1,
                                          const IntegratorConfig& config);

/// Advances x by `span` time units without recording intermediate states.
[[nodiscard]] Vector advance(const OdeSpec& spec, const Vector& x, double span, double dt);

}  // namespace ninn::dynamics
