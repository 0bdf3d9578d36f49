#pragma once

#include "ninn/assimilation/observation.hpp"
#include "ninn/nn/resnet.hpp"

namespace ninn::assimilation {

enum class Type2Variant { Plain, Lookahead };

/// Type 1 controlled pass of a single net. `recomputed` holds the clean trace
/// {y_l^RQoI}, l = 1 .. L-1, that the hidden states are nudged toward:
///   y_1     = (sigma(W_0 x + b_0) + tau*mu*r_1) / (1 + tau*mu)
///   y_{l+1} = y_l + tau*sigma(W_l y_l + b_l) - tau*mu*(y_l - r_{l+1})
[[nodiscard]] double type1_forward(const nn::ResNetParams& net, const Vector& input, const nn::HiddenTrace& recomputed,
                                   double mu_eff);

/// Type 2 (scalar output) controlled pass of a single net toward `target`:
///   y_{l+1} = y_l + tau*sigma(W_l y_l + b_l) - tau*mu*N_l*z,  z = W_{L-1}^T / |W_{L-1}|_1
/// with N_l = W_{L-1} y_l - target (plain) or the output of the remaining
/// uncontrolled layers applied to y_l minus target (lookahead).
[[nodiscard]] double type2_forward(const nn::ResNetParams& net, const Vector& input, double target, double mu_eff,
                                   Type2Variant variant);

/// One step of the system with Type 1 feedback on the nets whose output
/// component is observed. The recomputed trace comes from a clean pass on the
/// composite input (observations on observed components, w elsewhere).
[[nodiscard]] Vector ninn_type1_step(const nn::ResNetSystem& system, const Vector& w, const Vector& obs,
                                     const ObservationOperator& op, double mu_eff);

[[nodiscard]] Vector ninn_type2_step(const nn::ResNetSystem& system, const Vector& w, const Vector& obs,
                                     const ObservationOperator& op, double mu_eff, Type2Variant variant);

/// Overwrites observed components of w with obs, then applies the plain system.
[[nodiscard]] Vector direct_obs_step(const nn::ResNetSystem& system, const Vector& w, const Vector& obs,
                                     const ObservationOperator& op);

/// argmin over |x|_2 <= 1 of |W (y + x) - q|_2^2 (vector-output feedback
/// direction). Interior minimizers use the minimum-norm least-squares
/// solution; otherwise the multiplier nu in (W^T W + nu I) x = W^T (q - W y)
/// is bisected until |x|_2 = 1 within 1e-10.
[[nodiscard]] Vector case2_direction(const Matrix& W, const Vector& y, const Vector& q);

}  // namespace ninn::assimilation
