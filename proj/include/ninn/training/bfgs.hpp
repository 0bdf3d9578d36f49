#pragma once

#include "ninn/common.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ninn::training {

/// Returns f(x); writes the gradient into *grad when grad is non-null.
using ObjectiveFn = std::function<double(const Vector& x, Vector* grad)>;

struct BfgsOptions {
    double tol = 1e-10;       // stop when ||grad||_2 < tol
    int max_iters = 1000;
    double c1 = 1e-4;         // sufficient decrease
    double c2 = 0.9;          // curvature
    int max_line_search = 40;
    double curvature_skip = 1e-12;  // skip update when s.y <= curvature_skip * |s| |y|
};

enum class BfgsStatus { Converged, MaxIterations, LineSearchFailed, Stopped, NonFinite };

[[nodiscard]] const char* to_string(BfgsStatus status) noexcept;

struct BfgsIteration {
    int iteration = 0;
    double value = 0.0;
    double grad_norm = 0.0;
    double step = 0.0;
};

struct BfgsResult {
    Vector x;
    double value = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    int evaluations = 0;
    int skipped_updates = 0;
    BfgsStatus status = BfgsStatus::MaxIterations;
    bool warning = false;  // line search failed even after resetting the curvature model
    std::vector<BfgsIteration> history;
};

/// Called after every accepted iterate; returning false stops the run.
using BfgsCallback = std::function<bool(const BfgsIteration&, const Vector& x)>;

/// Full-memory BFGS on the inverse Hessian with a strong-Wolfe line search.
/// The returned iterate never has a larger objective than x0.
[[nodiscard]] BfgsResult bfgs_minimize(const ObjectiveFn& objective, const Vector& x0, const BfgsOptions& options = {},
                                       const BfgsCallback& callback = {});

/// Convenience overload taking separate value and gradient callables.
[[nodiscard]] BfgsResult bfgs_minimize(const std::function<double(const Vector&)>& value,
                                       const std::function<Vector(const Vector&)>& gradient, const Vector& x0,
                                       const BfgsOptions& options = {}, const BfgsCallback& callback = {});

}  // namespace ninn::training
