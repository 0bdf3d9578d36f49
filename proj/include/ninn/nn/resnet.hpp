#pragma once

#include "ninn/common.hpp"
#include "ninn/nn/activation.hpp"

#include <functional>
#include <vector>

namespace ninn::nn {

struct LayerParams {
    Matrix weights;  // rows = next-layer width, cols = this-layer width
    Vector bias;     // next-layer width
};

/// Dense residual network
///
///   y_1     = sigma(W_0 y_0 + b_0)
///   y_{l+1} = y_l + tau * sigma(W_l y_l + b_l),   l = 1 .. L-2
///   y_L     = W_{L-1} y_{L-1}
///
/// `hidden[l-1]` holds (W_l, b_l). The closing map carries no bias.
struct ResNetParams {
    LayerParams opening;
    std::vector<LayerParams> hidden;
    Matrix closing;
    double tau = 1.0;
    ActivationSpec activation;

    /// Zero-initialized net of depth L (L >= 3). A non-positive `tau` selects
    /// the default 1/(L-2).
    [[nodiscard]] static ResNetParams zeros(int input_dim, int output_dim, int depth, int width,
                                            double tau = 0.0, ActivationSpec activation = {});

    [[nodiscard]] int input_dim() const { return static_cast<int>(opening.weights.cols()); }
    [[nodiscard]] int output_dim() const { return static_cast<int>(closing.rows()); }
    [[nodiscard]] int width() const { return static_cast<int>(opening.weights.rows()); }
    [[nodiscard]] int depth() const { return static_cast<int>(hidden.size()) + 2; }

    /// Throws std::invalid_argument when shapes, tau or epsilon are inconsistent.
    void validate() const;

    // Flat parameter layout: W_0 (column-major), b_0, then (W_l, b_l) for each
    // residual layer, then W_{L-1}. Gradients use the same layout.
    [[nodiscard]] std::size_t parameter_count() const;
    [[nodiscard]] Vector flatten() const;
    void assign(const Vector& flat);
};

struct HiddenTrace {
    std::vector<Vector> states;  // y_1 .. y_{L-1}
};

struct ForwardResult {
    Vector output;
    HiddenTrace trace;
};

struct Gradients {
    Vector params;  // flat layout of ResNetParams::flatten
    Vector input;
};

// Single-layer building blocks, shared by the controlled forward passes.
[[nodiscard]] Vector opening_layer(const ResNetParams& net, const Vector& y0);
/// Applies residual layer `layer` (1 .. L-2) to y_layer.
[[nodiscard]] Vector residual_layer(const ResNetParams& net, int layer, const Vector& y);
[[nodiscard]] Vector closing_layer(const ResNetParams& net, const Vector& y);

/// Throws DivergenceError carrying the first layer that produced a
/// non-finite value.
[[nodiscard]] ForwardResult forward(const ResNetParams& net, const Vector& y0);

/// d(upstream . y_L)/d(theta) and d(upstream . y_L)/d(y_0).
[[nodiscard]] Gradients backprop(const ResNetParams& net, const Vector& y0, const Vector& upstream);

/// Column-wise forward pass over a batch (inputs: d x N, result: d_star x N).
[[nodiscard]] Matrix forward_batch(const ResNetParams& net, const Matrix& inputs);

/// Sum over columns of d(upstream_i . y_L(input_i))/d(theta). Also returns the
/// batch outputs so callers need a single pass for value and gradient.
struct BatchGradient {
    Matrix outputs;
    Vector params;
    Matrix inputs;  // per-sample input gradients, d x N
};
[[nodiscard]] BatchGradient backprop_batch(const ResNetParams& net, const Matrix& inputs,
                                           const std::function<Matrix(const Matrix&)>& upstream_of);

/// A collection of scalar-output nets; net i produces state component i from
/// the components listed in stencils[i].
struct ResNetSystem {
    std::vector<ResNetParams> nets;
    std::vector<std::vector<int>> stencils;
    int state_dim = 0;
    double dt_step = 1e-2;

    void validate() const;

    [[nodiscard]] static std::vector<std::vector<int>> full_stencils(int state_dim);
    /// Net i reads (i-2, i-1, i, i+1) with cyclic wrap.
    [[nodiscard]] static std::vector<std::vector<int>> lorenz96_stencils(int state_dim);
};

/// One application of the learned update map u(t_n) -> u(t_{n+1}).
/// DivergenceError::component() identifies the failing net.
[[nodiscard]] Vector system_forward(const ResNetSystem& system, const Vector& u);

}  // namespace ninn::nn
