#include "ninn/training/bfgs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace ninn::training {

const char* to_string(BfgsStatus status) noexcept {
    switch (status) {
        case BfgsStatus::Converged: return "converged";
        case BfgsStatus::MaxIterations: return "max_iterations";
        case BfgsStatus::LineSearchFailed: return "line_search_failed";
        case BfgsStatus::Stopped: return "stopped";
        case BfgsStatus::NonFinite: return "non_finite";
    }
    return "unknown";
}

namespace {

struct Probe {
    double alpha = 0.0;
    double value = 0.0;
    double slope = 0.0;
    Vector x;
    Vector grad;
};

class LineSearch {
public:
    LineSearch(const ObjectiveFn& f, const BfgsOptions& opt, int& evaluations)
        : f_(f), opt_(opt), evaluations_(evaluations) {}

    // Strong-Wolfe search along p from (x, value, grad); nullopt on failure.
    std::optional<Probe> run(const Vector& x, double value, const Vector& grad, const Vector& p, double alpha0) {
        x_ = &x;
        p_ = &p;
        phi0_ = value;
        dphi0_ = grad.dot(p);
        if (!(dphi0_ < 0.0)) return std::nullopt;

        Probe prev{0.0, value, dphi0_, x, grad};
        double alpha = alpha0;
        for (int i = 0; i < opt_.max_line_search; ++i) {
            Probe cur = eval(alpha);
            if (!std::isfinite(cur.value) || cur.value > phi0_ + opt_.c1 * alpha * dphi0_ ||
                (i > 0 && cur.value >= prev.value))
                return zoom(prev, cur);
            if (std::abs(cur.slope) <= -opt_.c2 * dphi0_) return cur;
            if (cur.slope >= 0.0) return zoom(cur, prev);
            prev = std::move(cur);
            alpha *= 2.0;
        }
        return std::nullopt;
    }

private:
    Probe eval(double alpha) {
        Probe p;
        p.alpha = alpha;
        p.x = *x_ + alpha * *p_;
        p.grad.resize(p.x.size());
        ++evaluations_;
        p.value = f_(p.x, &p.grad);
        if (!std::isfinite(p.value) || !p.grad.allFinite()) {
            p.value = std::numeric_limits<double>::infinity();
            p.slope = std::numeric_limits<double>::quiet_NaN();
        } else {
            p.slope = p.grad.dot(*p_);
        }
        return p;
    }

    std::optional<Probe> zoom(Probe lo, Probe hi) {
        for (int i = 0; i < opt_.max_line_search; ++i) {
            const double a = lo.alpha;
            const double b = hi.alpha;
            const double width = std::abs(b - a);
            if (width <= 1e-16 * std::max(1.0, std::abs(a))) break;
            double alpha = 0.5 * (a + b);
            if (std::isfinite(hi.value) && std::isfinite(hi.slope)) {
                // Minimizer of the cubic through (a, phi_a, dphi_a) and (b, phi_b, dphi_b).
                const double d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (a - b);
                const double disc = d1 * d1 - lo.slope * hi.slope;
                if (disc >= 0.0) {
                    const double d2 = std::copysign(std::sqrt(disc), b - a);
                    const double cubic = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
                    const double lo_edge = std::min(a, b) + 0.1 * width;
                    const double hi_edge = std::max(a, b) - 0.1 * width;
                    if (std::isfinite(cubic) && cubic >= lo_edge && cubic <= hi_edge) alpha = cubic;
                }
            }
            Probe cur = eval(alpha);
            if (!std::isfinite(cur.value) || cur.value > phi0_ + opt_.c1 * alpha * dphi0_ || cur.value >= lo.value) {
                hi = std::move(cur);
            } else {
                if (std::abs(cur.slope) <= -opt_.c2 * dphi0_) return cur;
                if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                lo = std::move(cur);
            }
        }
        // Accept a sufficient-decrease point even if the curvature test was not met.
        if (lo.alpha > 0.0 && lo.value < phi0_) return lo;
        return std::nullopt;
    }

    const ObjectiveFn& f_;
    const BfgsOptions& opt_;
    int& evaluations_;
    const Vector* x_ = nullptr;
    const Vector* p_ = nullptr;
    double phi0_ = 0.0;
    double dphi0_ = 0.0;
};

}  // namespace

BfgsResult bfgs_minimize(const ObjectiveFn& objective, const Vector& x0, const BfgsOptions& options,
                         const BfgsCallback& callback) {
    BfgsResult result;
    result.x = x0;
    Vector grad(x0.size());
    result.value = objective(result.x, &grad);
    result.evaluations = 1;
    if (!std::isfinite(result.value) || !grad.allFinite()) {
        result.status = BfgsStatus::NonFinite;
        result.grad_norm = std::numeric_limits<double>::infinity();
        return result;
    }
    result.grad_norm = grad.norm();
    if (result.grad_norm < options.tol) {
        result.status = BfgsStatus::Converged;
        return result;
    }

    const auto n = x0.size();
    Matrix inv_hessian = Matrix::Identity(n, n);
    bool fresh_model = true;
    LineSearch search(objective, options, result.evaluations);

    for (int iter = 1; iter <= options.max_iters; ++iter) {
        Vector direction = -(inv_hessian * grad);
        double alpha0 = fresh_model ? std::min(1.0, 1.0 / result.grad_norm) : 1.0;
        auto probe = search.run(result.x, result.value, grad, direction, alpha0);
        if (!probe && !fresh_model) {
            // Curvature reset: fall back to steepest descent once.
            inv_hessian.setIdentity();
            fresh_model = true;
            direction = -grad;
            alpha0 = std::min(1.0, 1.0 / result.grad_norm);
            probe = search.run(result.x, result.value, grad, direction, alpha0);
        }
        if (!probe) {
            result.status = BfgsStatus::LineSearchFailed;
            result.warning = true;
            return result;
        }

        const Vector s = probe->x - result.x;
        const Vector y = probe->grad - grad;
        const double sy = s.dot(y);
        if (sy > options.curvature_skip * s.norm() * y.norm()) {
            if (fresh_model) {
                inv_hessian *= sy / y.squaredNorm();
                fresh_model = false;
            }
            const double rho = 1.0 / sy;
            const Vector hy = inv_hessian * y;
            const double yhy = y.dot(hy);
            const Vector hy_rho = rho * hy;
            const Vector s_scaled = (rho * rho * yhy + rho) * s;
            inv_hessian.noalias() -= hy_rho * s.transpose();
            inv_hessian.noalias() -= s * hy_rho.transpose();
            inv_hessian.noalias() += s_scaled * s.transpose();
        } else {
            ++result.skipped_updates;
        }

        result.x = std::move(probe->x);
        result.value = probe->value;
        grad = std::move(probe->grad);
        result.grad_norm = grad.norm();
        result.iterations = iter;
        const BfgsIteration record{iter, result.value, result.grad_norm, probe->alpha};
        result.history.push_back(record);

        if (result.grad_norm < options.tol) {
            result.status = BfgsStatus::Converged;
            return result;
        }
        if (callback && !callback(record, result.x)) {
            result.status = BfgsStatus::Stopped;
            return result;
        }
    }
    result.status = BfgsStatus::MaxIterations;
    return result;
}

BfgsResult bfgs_minimize(const std::function<double(const Vector&)>& value,
                         const std::function<Vector(const Vector&)>& gradient, const Vector& x0,
                         const BfgsOptions& options, const BfgsCallback& callback) {
    const ObjectiveFn combined = [&](const Vector& x, Vector* grad) {
        if (grad) *grad = gradient(x);
        return value(x);
    };
    return bfgs_minimize(combined, x0, options, callback);
}

}  // namespace ninn::training
