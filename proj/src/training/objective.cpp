#include "ninn/training/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ninn::training {

namespace {

// Flat offsets of the bias blocks b_0 .. b_{L-2}.
std::vector<Eigen::Index> bias_offsets(const nn::ResNetParams& net) {
    const Eigen::Index n = net.width();
    const Eigen::Index d = net.input_dim();
    std::vector<Eigen::Index> out{n * d};
    for (int l = 0; l < net.depth() - 2; ++l) out.push_back(n * d + n + l * (n * n + n) + n * n);
    return out;
}

double bias_penalty_with_grad(const nn::ResNetParams& net, const Vector& flat, double gamma, Vector* grad) {
    const Eigen::Index n = net.width();
    double total = 0.0;
    for (const auto off : bias_offsets(net)) {
        for (Eigen::Index j = 0; j + 1 < n; ++j) {
            const double gap = std::min(flat[off + j + 1] - flat[off + j], 0.0);
            total += gap * gap;
            if (grad && gap < 0.0) {
                (*grad)[off + j + 1] += gamma * gap;
                (*grad)[off + j] -= gamma * gap;
            }
        }
    }
    return 0.5 * gamma * total;
}

}  // namespace

double data_loss(const nn::ResNetParams& net, const Matrix& inputs, const Matrix& targets) {
    if (inputs.cols() == 0) throw std::invalid_argument("data_loss: empty batch");
    if (targets.rows() != net.output_dim() || targets.cols() != inputs.cols())
        throw DimensionError("data_loss: targets do not match net output");
    const Matrix out = nn::forward_batch(net, inputs);
    if (!out.allFinite()) throw DivergenceError("data_loss: non-finite forward pass");
    return 0.5 * (out - targets).squaredNorm() / static_cast<double>(inputs.cols());
}

double regularizer(const nn::ResNetParams& net, double lambda, double l1_delta) {
    if (lambda < 0.0) throw std::invalid_argument("regularizer: lambda must be >= 0");
    if (lambda == 0.0) return 0.0;
    const Vector flat = net.flatten();
    double sum = 0.0;
    for (Eigen::Index k = 0; k < flat.size(); ++k) sum += smooth_abs(flat[k], l1_delta) + flat[k] * flat[k];
    return 0.5 * lambda * sum;
}

double bias_order_penalty(const nn::ResNetParams& net, double gamma) {
    if (gamma < 0.0) throw std::invalid_argument("bias_order_penalty: gamma must be >= 0");
    return bias_penalty_with_grad(net, net.flatten(), gamma, nullptr);
}

double max_bias_order_violation(const nn::ResNetParams& net) {
    const Vector flat = net.flatten();
    double worst = 0.0;
    for (const auto off : bias_offsets(net))
        for (Eigen::Index j = 0; j + 1 < net.width(); ++j)
            worst = std::max(worst, -std::min(flat[off + j + 1] - flat[off + j], 0.0));
    return worst;
}

TrainingObjective::TrainingObjective(nn::ResNetParams shape, Matrix inputs, Matrix targets, ObjectiveWeights weights)
    : shape_(std::move(shape)), inputs_(std::move(inputs)), targets_(std::move(targets)), weights_(weights) {
    if (inputs_.rows() != shape_.input_dim() || targets_.rows() != shape_.output_dim() ||
        inputs_.cols() != targets_.cols() || inputs_.cols() == 0)
        throw DimensionError("TrainingObjective: data does not match net shape");
    if (weights_.lambda < 0.0 || weights_.gamma < 0.0 || !(weights_.l1_delta > 0.0))
        throw std::invalid_argument("TrainingObjective: invalid weights");
}

double TrainingObjective::operator()(const Vector& flat, Vector* grad) const {
    shape_.assign(flat);
    const double inv_n = 1.0 / static_cast<double>(inputs_.cols());
    double loss = 0.0;
    try {
        if (grad) {
            auto bg = nn::backprop_batch(shape_, inputs_, [&](const Matrix& out) -> Matrix {
                return (out - targets_) * inv_n;
            });
            loss = 0.5 * (bg.outputs - targets_).squaredNorm() * inv_n;
            *grad = std::move(bg.params);
        } else {
            const Matrix out = nn::forward_batch(shape_, inputs_);
            if (!out.allFinite()) return std::numeric_limits<double>::infinity();
            loss = 0.5 * (out - targets_).squaredNorm() * inv_n;
        }
    } catch (const DivergenceError&) {
        return std::numeric_limits<double>::infinity();
    }

    const double lambda = weights_.lambda;
    const double delta = weights_.l1_delta;
    double reg = 0.0;
    if (lambda > 0.0) {
        for (Eigen::Index k = 0; k < flat.size(); ++k) {
            const double x = flat[k];
            const double root = std::sqrt(x * x + delta * delta);
            reg += root - delta + x * x;
            if (grad) (*grad)[k] += 0.5 * lambda * (x / root + 2.0 * x);
        }
        reg *= 0.5 * lambda;
    }
    const double bias = bias_penalty_with_grad(shape_, flat, weights_.gamma, grad);
    return loss + reg + bias;
}

}  // namespace ninn::training
