#include "ninn/assimilation/feedback.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace ninn::assimilation {

namespace {

void require_finite(const Vector& v, int layer) {
    if (!v.allFinite()) throw DivergenceError("controlled pass left the finite range", layer);
}

double scalar_output(const nn::ResNetParams& net, const Vector& y) {
    const double out = net.closing.row(0).dot(y);
    if (!std::isfinite(out)) throw DivergenceError("controlled pass produced a non-finite output", net.depth() - 1);
    return out;
}

template <typename NetStep>
Vector controlled_system_step(const nn::ResNetSystem& system, const Vector& w, const ObservationOperator& op,
                              NetStep&& controlled) {
    if (w.size() != system.state_dim || op.state_dim() != system.state_dim)
        throw DimensionError("controlled step: state, operator and system dimensions differ");
    Vector next(system.state_dim);
    for (int i = 0; i < system.state_dim; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const Vector input = gather(w, system.stencils[idx]);
        try {
            next[i] = op.is_observed(i) ? controlled(i, input) : nn::forward(system.nets[idx], input).output[0];
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " (component " + std::to_string(i) + ")", e.layer(), i);
        }
    }
    return next;
}

}  // namespace

double type1_forward(const nn::ResNetParams& net, const Vector& input, const nn::HiddenTrace& recomputed,
                     double mu_eff) {
    const int depth = net.depth();
    if (recomputed.states.size() != static_cast<std::size_t>(depth - 1))
        throw DimensionError("type1_forward: recomputed trace has wrong length");
    const double gain = net.tau * mu_eff;
    Vector y = (nn::opening_layer(net, input) + gain * recomputed.states[0]) / (1.0 + gain);
    require_finite(y, 0);
    for (int l = 1; l <= depth - 2; ++l) {
        const auto& target = recomputed.states[static_cast<std::size_t>(l)];
        y = nn::residual_layer(net, l, y) - gain * (y - target);
        require_finite(y, l);
    }
    return scalar_output(net, y);
}

double type2_forward(const nn::ResNetParams& net, const Vector& input, double target, double mu_eff,
                     Type2Variant variant) {
    if (net.output_dim() != 1) throw DimensionError("type2_forward: Case 1 needs a scalar-output net");
    const int depth = net.depth();
    const Vector readout = net.closing.row(0).transpose();
    const double l1 = readout.lpNorm<1>();
    const Vector z = l1 > 0.0 ? Vector(readout / l1) : Vector(Vector::Zero(readout.size()));
    const double gain = net.tau * mu_eff;

    Vector y = nn::opening_layer(net, input);
    require_finite(y, 0);
    for (int l = 1; l <= depth - 2; ++l) {
        Vector advanced = nn::residual_layer(net, l, y);
        double mismatch = 0.0;
        if (variant == Type2Variant::Plain) {
            mismatch = readout.dot(y) - target;
        } else {
            Vector ahead = advanced;
            for (int m = l + 1; m <= depth - 2; ++m) ahead = nn::residual_layer(net, m, ahead);
            mismatch = readout.dot(ahead) - target;
        }
        y = advanced - (gain * mismatch) * z;
        require_finite(y, l);
    }
    return scalar_output(net, y);
}

Vector ninn_type1_step(const nn::ResNetSystem& system, const Vector& w, const Vector& obs,
                       const ObservationOperator& op, double mu_eff) {
    if (mu_eff == 0.0) return nn::system_forward(system, w);
    const Vector composite = op.insert(w, obs);
    return controlled_system_step(system, w, op, [&](int i, const Vector& input) {
        const auto idx = static_cast<std::size_t>(i);
        const auto clean = nn::forward(system.nets[idx], gather(composite, system.stencils[idx]));
        return type1_forward(system.nets[idx], input, clean.trace, mu_eff);
    });
}

Vector ninn_type2_step(const nn::ResNetSystem& system, const Vector& w, const Vector& obs,
                       const ObservationOperator& op, double mu_eff, Type2Variant variant) {
    if (mu_eff == 0.0) return nn::system_forward(system, w);
    const Vector targets = op.embed(obs);
    return controlled_system_step(system, w, op, [&](int i, const Vector& input) {
        return type2_forward(system.nets[static_cast<std::size_t>(i)], input, targets[i], mu_eff, variant);
    });
}

Vector direct_obs_step(const nn::ResNetSystem& system, const Vector& w, const Vector& obs,
                       const ObservationOperator& op) {
    return nn::system_forward(system, op.insert(w, obs));
}

Vector case2_direction(const Matrix& W, const Vector& y, const Vector& q) {
    if (W.rows() < 2) throw DimensionError("case2_direction: needs a vector-output map (rows > 1)");
    if (y.size() != W.cols() || q.size() != W.rows()) throw DimensionError("case2_direction: dimension mismatch");
    const Vector residual = q - W * y;
    const Eigen::JacobiSVD<Matrix> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sigma = svd.singularValues();
    const Vector coeff = svd.matrixU().transpose() * residual;
    const double cutoff = sigma.size() > 0 ? sigma[0] * 1e-12 * static_cast<double>(std::max(W.rows(), W.cols())) : 0.0;

    // x(nu) = sum_i sigma_i / (sigma_i^2 + nu) * (u_i . r) v_i, nu >= 0.
    auto solve = [&](double nu) {
        Vector scaled = Vector::Zero(sigma.size());
        for (Eigen::Index i = 0; i < sigma.size(); ++i)
            if (sigma[i] > cutoff) scaled[i] = sigma[i] / (sigma[i] * sigma[i] + nu) * coeff[i];
        return Vector(svd.matrixV() * scaled);
    };

    Vector x = solve(0.0);
    if (x.norm() <= 1.0) return x;

    double lo = 0.0;
    double hi = 1.0;
    while (solve(hi).norm() > 1.0) hi *= 2.0;
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        x = solve(mid);
        const double norm = x.norm();
        if (std::abs(norm - 1.0) <= 1e-12) break;
        (norm > 1.0 ? lo : hi) = mid;
        if (hi - lo <= 1e-300) break;
    }
    const double norm = x.norm();
    if (norm > 1.0) x /= norm;
    return x;
}

}  // namespace ninn::assimilation
