#include "ninn/nn/resnet.hpp"

#include <string>

namespace ninn {

Vector gather(const Vector& u, const std::vector<int>& indices) {
    Vector out(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t k = 0; k < indices.size(); ++k) out[static_cast<Eigen::Index>(k)] = u[indices[k]];
    return out;
}

}  // namespace ninn

namespace ninn::nn {

namespace {

void check_finite(const Vector& v, int layer) {
    if (!v.allFinite())
        throw DivergenceError("non-finite value in layer " + std::to_string(layer), layer);
}

}  // namespace

ResNetParams ResNetParams::zeros(int input_dim, int output_dim, int depth, int width, double tau,
                                 ActivationSpec activation) {
    if (input_dim < 1 || output_dim < 1 || width < 1 || depth < 3)
        throw std::invalid_argument("ResNetParams::zeros: need dims >= 1 and depth >= 3");
    ResNetParams net;
    net.opening = {Matrix::Zero(width, input_dim), Vector::Zero(width)};
    net.hidden.assign(static_cast<std::size_t>(depth - 2), {Matrix::Zero(width, width), Vector::Zero(width)});
    net.closing = Matrix::Zero(output_dim, width);
    net.tau = tau > 0.0 ? tau : 1.0 / static_cast<double>(depth - 2);
    net.activation = activation;
    return net;
}

void ResNetParams::validate() const {
    activation.validate();
    if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("tau must be positive and finite");
    const auto n = opening.weights.rows();
    if (n < 1 || opening.weights.cols() < 1) throw std::invalid_argument("opening layer is empty");
    if (opening.bias.size() != n) throw std::invalid_argument("opening bias width mismatch");
    if (hidden.empty()) throw std::invalid_argument("depth must be at least 3");
    for (std::size_t l = 0; l < hidden.size(); ++l) {
        const auto& h = hidden[l];
        if (h.weights.rows() != n || h.weights.cols() != n || h.bias.size() != n)
            throw std::invalid_argument("residual layer " + std::to_string(l + 1) + " is not " +
                                        std::to_string(n) + "x" + std::to_string(n));
    }
    if (closing.cols() != n || closing.rows() < 1) throw std::invalid_argument("closing layer width mismatch");
    if (!flatten().allFinite()) throw std::invalid_argument("non-finite parameter");
}

std::size_t ResNetParams::parameter_count() const {
    auto count = static_cast<std::size_t>(opening.weights.size() + opening.bias.size() + closing.size());
    for (const auto& h : hidden) count += static_cast<std::size_t>(h.weights.size() + h.bias.size());
    return count;
}

Vector ResNetParams::flatten() const {
    Vector flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index at = 0;
    auto put = [&](const auto& m) {
        flat.segment(at, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
        at += m.size();
    };
    put(opening.weights);
    put(opening.bias);
    for (const auto& h : hidden) {
        put(h.weights);
        put(h.bias);
    }
    put(closing);
    return flat;
}

void ResNetParams::assign(const Vector& flat) {
    if (static_cast<std::size_t>(flat.size()) != parameter_count())
        throw DimensionError("ResNetParams::assign: flat vector has wrong length");
    Eigen::Index at = 0;
    auto take = [&](auto& m) {
        Eigen::Map<Vector>(m.data(), m.size()) = flat.segment(at, m.size());
        at += m.size();
    };
    take(opening.weights);
    take(opening.bias);
    for (auto& h : hidden) {
        take(h.weights);
        take(h.bias);
    }
    take(closing);
}

Vector opening_layer(const ResNetParams& net, const Vector& y0) {
    return activation(net.opening.weights * y0 + net.opening.bias, net.activation);
}

Vector residual_layer(const ResNetParams& net, int layer, const Vector& y) {
    const auto& h = net.hidden[static_cast<std::size_t>(layer - 1)];
    return y + net.tau * activation(h.weights * y + h.bias, net.activation);
}

Vector closing_layer(const ResNetParams& net, const Vector& y) { return net.closing * y; }

ForwardResult forward(const ResNetParams& net, const Vector& y0) {
    if (y0.size() != net.input_dim()) throw DimensionError("forward: input has wrong dimension");
    ForwardResult result;
    const int depth = net.depth();
    result.trace.states.reserve(static_cast<std::size_t>(depth - 1));
    Vector y = opening_layer(net, y0);
    check_finite(y, 0);
    result.trace.states.push_back(y);
    for (int l = 1; l <= depth - 2; ++l) {
        y = residual_layer(net, l, y);
        check_finite(y, l);
        result.trace.states.push_back(y);
    }
    result.output = closing_layer(net, y);
    check_finite(result.output, depth - 1);
    return result;
}

Gradients backprop(const ResNetParams& net, const Vector& y0, const Vector& upstream) {
    if (upstream.size() != net.output_dim()) throw DimensionError("backprop: upstream has wrong dimension");
    const auto batch = backprop_batch(net, y0, [&](const Matrix&) -> Matrix { return upstream; });

    return {batch.params, batch.inputs.col(0)};
}

Matrix forward_batch(const ResNetParams& net, const Matrix& inputs) {
    const auto& act = net.activation;
    Matrix y = activation((net.opening.weights * inputs).colwise() + net.opening.bias, act);
    for (const auto& h : net.hidden) {
        Matrix a = (h.weights * y).colwise() + h.bias;
        y += net.tau * activation(a, act);
    }
    return net.closing * y;
}

BatchGradient backprop_batch(const ResNetParams& net, const Matrix& inputs,
                             const std::function<Matrix(const Matrix&)>& upstream_of) {
    if (inputs.rows() != net.input_dim()) throw DimensionError("backprop_batch: input has wrong dimension");
    const auto& act = net.activation;
    const int depth = net.depth();
    const auto n_res = static_cast<std::size_t>(depth - 2);

    Matrix a0 = (net.opening.weights * inputs).colwise() + net.opening.bias;
    std::vector<Matrix> ys;
    std::vector<Matrix> pre;
    ys.reserve(n_res + 1);
    pre.reserve(n_res);
    ys.push_back(activation(a0, act));
    for (std::size_t l = 0; l < n_res; ++l) {
        pre.push_back((net.hidden[l].weights * ys.back()).colwise() + net.hidden[l].bias);
        ys.push_back(ys.back() + net.tau * activation(pre.back(), act));
    }

    BatchGradient out;
    out.outputs = net.closing * ys.back();
    if (!out.outputs.allFinite()) throw DivergenceError("backprop_batch: non-finite forward output", depth - 1);
    const Matrix upstream = upstream_of(out.outputs);
    if (upstream.rows() != out.outputs.rows() || upstream.cols() != out.outputs.cols())
        throw DimensionError("backprop_batch: upstream shape mismatch");

    out.params.resize(static_cast<Eigen::Index>(net.parameter_count()));
    const Eigen::Index n = net.width();
    const Eigen::Index d = net.input_dim();
    Eigen::Index tail = out.params.size() - net.closing.size();
    Matrix g_closing = upstream * ys.back().transpose();
    out.params.segment(tail, g_closing.size()) = Eigen::Map<const Vector>(g_closing.data(), g_closing.size());

    Matrix gy = net.closing.transpose() * upstream;
    for (std::size_t l = n_res; l-- > 0;) {
        Matrix delta = net.tau * activation_derivative(pre[l], act).cwiseProduct(gy);
        Matrix gw = delta * ys[l].transpose();
        Vector gb = delta.rowwise().sum();
        const Eigen::Index start = n * d + n + static_cast<Eigen::Index>(l) * (n * n + n);
        out.params.segment(start, n * n) = Eigen::Map<const Vector>(gw.data(), n * n);
        out.params.segment(start + n * n, n) = gb;
        gy += net.hidden[l].weights.transpose() * delta;
    }
    Matrix delta0 = activation_derivative(a0, act).cwiseProduct(gy);
    Matrix gw0 = delta0 * inputs.transpose();
    out.params.segment(0, n * d) = Eigen::Map<const Vector>(gw0.data(), n * d);
    out.params.segment(n * d, n) = delta0.rowwise().sum();
    out.inputs = net.opening.weights.transpose() * delta0;
    if (!out.params.allFinite() || !out.inputs.allFinite()) throw DivergenceError("backprop_batch: non-finite gradient");
    return out;
}

void ResNetSystem::validate() const {
    if (state_dim < 1) throw std::invalid_argument("system state_dim must be positive");
    if (nets.size() != static_cast<std::size_t>(state_dim))
        throw DimensionError("system has " + std::to_string(nets.size()) + " nets for state_dim " +
                             std::to_string(state_dim));
    if (stencils.size() != nets.size()) throw DimensionError("system stencil count does not match net count");
    if (!(dt_step > 0.0)) throw std::invalid_argument("system dt_step must be positive");
    const int depth = nets.front().depth();
    for (std::size_t i = 0; i < nets.size(); ++i) {
        nets[i].validate();
        if (nets[i].output_dim() != 1) throw DimensionError("system nets must have scalar output");
        if (nets[i].depth() != depth) throw DimensionError("system nets must share one depth");
        if (static_cast<int>(stencils[i].size()) != nets[i].input_dim())
            throw DimensionError("stencil " + std::to_string(i) + " does not match net input dimension");
        for (int idx : stencils[i])
            if (idx < 0 || idx >= state_dim) throw DimensionError("stencil index out of range");
    }
}

std::vector<std::vector<int>> ResNetSystem::full_stencils(int state_dim) {
    std::vector<int> all(static_cast<std::size_t>(state_dim));
    for (int i = 0; i < state_dim; ++i) all[static_cast<std::size_t>(i)] = i;
    return std::vector<std::vector<int>>(static_cast<std::size_t>(state_dim), all);
}

std::vector<std::vector<int>> ResNetSystem::lorenz96_stencils(int state_dim) {
    if (state_dim < 4) throw std::invalid_argument("Lorenz 96 stencils need state_dim >= 4");
    std::vector<std::vector<int>> out;
    for (int i = 0; i < state_dim; ++i)
        out.push_back({(i - 2 + state_dim) % state_dim, (i - 1 + state_dim) % state_dim, i, (i + 1) % state_dim});
    return out;
}

Vector system_forward(const ResNetSystem& system, const Vector& u) {
    if (u.size() != system.state_dim) throw DimensionError("system_forward: state has wrong dimension");
    Vector out(system.state_dim);
    for (int i = 0; i < system.state_dim; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        try {
            out[i] = forward(system.nets[idx], gather(u, system.stencils[idx])).output[0];
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " (component " + std::to_string(i) + ")", e.layer(), i);
        }
    }
    return out;
}

}  // namespace ninn::nn
