#pragma once

#include "ninn/common.hpp"

namespace ninn::nn {

/// Smoothed ReLU: max(0, x) outside [-epsilon, epsilon], and the quadratic
/// x^2/(4 eps) + x/2 + eps/4 inside, which matches value and slope at the seams.
struct ActivationSpec {
    double epsilon = 0.1;

    void validate() const {
        if (!(epsilon > 0.0)) throw std::invalid_argument("activation epsilon must be positive");
    }
};

[[nodiscard]] inline double activation(double x, const ActivationSpec& spec) noexcept {
    const double eps = spec.epsilon;
    if (x > eps) return x;
    if (x < -eps) return 0.0;
    return x * x / (4.0 * eps) + 0.5 * x + 0.25 * eps;
}

[[nodiscard]] inline double activation_derivative(double x, const ActivationSpec& spec) noexcept {
    const double eps = spec.epsilon;
    if (x > eps) return 1.0;
    if (x < -eps) return 0.0;
    return x / (2.0 * eps) + 0.5;
}

template <typename Derived>
[[nodiscard]] auto activation(const Eigen::MatrixBase<Derived>& x, const ActivationSpec& spec) {
    return x.unaryExpr([spec](double v) { return activation(v, spec); });
}

template <typename Derived>
[[nodiscard]] auto activation_derivative(const Eigen::MatrixBase<Derived>& x, const ActivationSpec& spec) {
    return x.unaryExpr([spec](double v) { return activation_derivative(v, spec); });
}

}  // namespace ninn::nn
