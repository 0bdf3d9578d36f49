#pragma once

#include "ninn/nn/resnet.hpp"

namespace ninn::training {

/// (1/2N) sum_i |y_L(u_i) - s_i|^2 over the columns of `inputs` / `targets`.
[[nodiscard]] double data_loss(const nn::ResNetParams& net, const Matrix& inputs, const Matrix& targets);

/// Smoothed |x| used inside the 1-norms: sqrt(x^2 + delta^2) - delta.
[[nodiscard]] inline double smooth_abs(double x, double delta) { return std::sqrt(x * x + delta * delta) - delta; }

/// (lambda/2) sum over every weight and bias of (smooth_abs + square).
[[nodiscard]] double regularizer(const nn::ResNetParams& net, double lambda, double l1_delta);

/// (gamma/2) sum over layers 0 .. L-2 and adjacent pairs of min(b[j+1] - b[j], 0)^2.
[[nodiscard]] double bias_order_penalty(const nn::ResNetParams& net, double gamma);

/// Largest |min(b[j+1] - b[j], 0)| over all biased layers.
[[nodiscard]] double max_bias_order_violation(const nn::ResNetParams& net);

struct ObjectiveWeights {
    double lambda = 0.0;
    double gamma = 0.0;
    double l1_delta = 1e-8;
};

/// data_loss + regularizer + bias_order_penalty as a function of the flat
/// parameter vector of `shape`.
class TrainingObjective {
public:
    TrainingObjective(nn::ResNetParams shape, Matrix inputs, Matrix targets, ObjectiveWeights weights);

    /// Value at `flat`; fills *grad when non-null.
    double operator()(const Vector& flat, Vector* grad) const;

    [[nodiscard]] const nn::ResNetParams& shape() const { return shape_; }
    [[nodiscard]] const ObjectiveWeights& weights() const { return weights_; }

private:
    mutable nn::ResNetParams shape_;
    Matrix inputs_;
    Matrix targets_;
    ObjectiveWeights weights_;
};

}  // namespace ninn::training
