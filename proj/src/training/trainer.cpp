#include "ninn/training/trainer.hpp"

#include "ninn/csv.hpp"
#include "ninn/dynamics/datagen.hpp"
#include "ninn/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ninn::training {

void TrainConfig::validate() const {
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw std::invalid_argument("split_fraction must be in (0,1)");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    if (gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
    if (!(l1_delta > 0.0)) throw std::invalid_argument("l1_delta must be positive");
    if (!(box_scale > 0.0)) throw std::invalid_argument("box_scale must be positive");
}

namespace {

using nn::LayerParams;

// Draws one layer whose rows act on inputs spanning `inputs` (width_in x M).
LayerParams box_layer(const Matrix& inputs, int rows, double box_scale, std::mt19937_64& rng) {
    const auto d = inputs.rows();
    const Vector lo = inputs.rowwise().minCoeff();
    const Vector hi = inputs.rowwise().maxCoeff();
    const Vector center = 0.5 * (lo + hi);
    Vector half = 0.5 * (hi - lo);
    for (Eigen::Index j = 0; j < d; ++j)
        if (!(half[j] > 1e-12)) half[j] = 1.0;

    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    LayerParams layer{Matrix(rows, d), Vector(rows)};
    for (int r = 0; r < rows; ++r) {
        Vector dir(d);
        for (Eigen::Index j = 0; j < d; ++j) dir[j] = normal(rng);
        dir /= dir.norm();
        Vector point(d);
        for (Eigen::Index j = 0; j < d; ++j) point[j] = uniform(rng);
        // In box coordinates x^ in [-1,1]^d the neuron computes k * dir.(x^ - point).
        const double reach = dir.lpNorm<1>() + std::abs(dir.dot(point));
        const double k = box_scale / reach;
        const Vector w = k * dir.cwiseQuotient(half);
        layer.weights.row(r) = w.transpose();
        layer.bias[r] = -k * dir.dot(point) - w.dot(center);
    }
    std::vector<int> order(static_cast<std::size_t>(rows));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return layer.bias[a] < layer.bias[b]; });
    LayerParams sorted{Matrix(rows, d), Vector(rows)};
    for (int r = 0; r < rows; ++r) {
        sorted.weights.row(r) = layer.weights.row(order[static_cast<std::size_t>(r)]);
        sorted.bias[r] = layer.bias[order[static_cast<std::size_t>(r)]];
    }
    return sorted;
}


Matrix columns(const std::vector<Vector>& vs, const std::vector<std::size_t>& idx, const std::vector<int>& stencil) {
    Matrix m(static_cast<Eigen::Index>(stencil.size()), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c)
        for (std::size_t r = 0; r < stencil.size(); ++r)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = vs[idx[c]][stencil[r]];
    return m;
}

}  // namespace

nn::ResNetParams box_init(const nn::ResNetParams& shape, const Matrix& sample_inputs, double box_scale,
                          std::mt19937_64& rng) {
    if (sample_inputs.rows() != shape.input_dim() || sample_inputs.cols() == 0)
        throw DimensionError("box_init: sample inputs do not match net input dimension");
    if (!(box_scale > 0.0)) throw std::invalid_argument("box_init: box_scale must be positive");
    nn::ResNetParams net = shape;
    const int n = shape.width();
    net.opening = box_layer(sample_inputs, n, box_scale, rng);
    Matrix y = nn::activation((net.opening.weights * sample_inputs).colwise() + net.opening.bias, net.activation);
    for (auto& h : net.hidden) {
        h = box_layer(y, n, box_scale, rng);
        Matrix a = (h.weights * y).colwise() + h.bias;
        y += net.tau * nn::activation(a, net.activation);
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    std::uniform_real_distribution<double> uniform(-scale, scale);
    for (Eigen::Index k = 0; k < net.closing.size(); ++k) net.closing.data()[k] = uniform(rng);
    return net;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double fraction,
                                                                           std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("split_indices: need at least two samples");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    // Fisher-Yates with explicit draws; std::shuffle's algorithm is unspecified.
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(order[i], order[j]);
    }
    auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> val(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {train, val};
}

nn::ResNetParams train_net(const nn::ResNetParams& start, const Matrix& train_in, const Matrix& train_out,
                           const Matrix& val_in, const Matrix& val_out, const TrainConfig& config,
                           TrainHistory& history) {
    config.validate();
    const TrainingObjective objective(start, train_in, train_out, {config.lambda, config.gamma, config.l1_delta});
    nn::ResNetParams probe = start;

    auto validation_loss = [&](const Vector& flat) {
        probe.assign(flat);
        const Matrix out = nn::forward_batch(probe, val_in);
        if (!out.allFinite()) return std::numeric_limits<double>::infinity();
        return 0.5 * (out - val_out).squaredNorm() / static_cast<double>(val_in.cols());
    };

    const Vector x0 = start.flatten();
    Vector g0(x0.size());
    const double f0 = objective(x0, &g0);
    history.records.clear();
    history.records.push_back({0, f0, validation_loss(x0), g0.norm()});
    history.best_iter = 0;
    if (!std::isfinite(f0)) {
        history.diverged = true;
        history.status = "diverged";
        return start;
    }

    Vector best = x0;
    double best_val = history.records.front().val_loss;
    BfgsOptions options;
    options.tol = config.tol;
    options.max_iters = config.max_iters;
    const auto result = bfgs_minimize(
        [&](const Vector& x, Vector* g) { return objective(x, g); }, x0, options,
        [&](const BfgsIteration& it, const Vector& x) {
            const double val = validation_loss(x);
            history.records.push_back({it.iteration, it.value, val, it.grad_norm});
            if (val < best_val) {
                best_val = val;
                best = x;
                history.best_iter = it.iteration;
            }
            return it.iteration - history.best_iter < config.patience;
        });
    // A converged final iterate is not reported through the callback.
    if (result.status == BfgsStatus::Converged && result.iterations > 0 &&
        history.records.back().iter != result.iterations) {
        const double val = validation_loss(result.x);
        history.records.push_back({result.iterations, result.value, val, result.grad_norm});
        if (val < best_val) {
            best = result.x;
            history.best_iter = result.iterations;
        }
    }
    history.status = result.status == BfgsStatus::Stopped ? "patience" : to_string(result.status);
    nn::ResNetParams trained = start;
    trained.assign(best);
    return trained;
}

TrainedSystem train_system(const nn::ResNetSystem& system, const Dataset& data, const TrainConfig& config, int jobs) {
    system.validate();
    data.validate();
    config.validate();
    if (data.state_dim() != system.state_dim)
        throw DimensionError("train_system: dataset dimension " + std::to_string(data.state_dim()) +
                             " does not match system state_dim " + std::to_string(system.state_dim));
    const auto [train_idx, val_idx] = split_indices(data.size(), config.split_fraction, config.seed);

    TrainedSystem out;
    out.system = system;
    out.system.dt_step = data.dt_step;
    out.histories.resize(system.nets.size());
    parallel_for(system.nets.size(), jobs, [&](std::size_t i) {
        const auto& stencil = system.stencils[i];
        const std::vector<int> target_row{static_cast<int>(i)};
        const Matrix train_in = columns(data.inputs, train_idx, stencil);
        const Matrix train_out = columns(data.targets, train_idx, target_row);
        const Matrix val_in = columns(data.inputs, val_idx, stencil);
        const Matrix val_out = columns(data.targets, val_idx, target_row);
        nn::ResNetParams start = system.nets[i];
        if (!config.warm_start) {
            std::mt19937_64 rng(dynamics::derive_seed(config.seed, i + 1));
            start = box_init(system.nets[i], train_in, config.box_scale, rng);
        }
        try {
            out.system.nets[i] = train_net(start, train_in, train_out, val_in, val_out, config, out.histories[i]);
        } catch (const DivergenceError&) {
            out.histories[i].diverged = true;
            out.histories[i].status = "diverged";
            out.system.nets[i] = start;
        }
    });
    return out;
}

double one_step_rms_error(const nn::ResNetSystem& system, const Dataset& data) {
    if (data.size() == 0) throw std::invalid_argument("one_step_rms_error: empty dataset");
    double sum = 0.0;
    for (std::size_t k = 0; k < data.size(); ++k)
        sum += (nn::system_forward(system, data.inputs[k]) - data.targets[k]).squaredNorm();
    return std::sqrt(sum / static_cast<double>(data.size() * static_cast<std::size_t>(system.state_dim)));
}

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history) {
    csv::Table table;
    table.header = {"iter", "train_loss", "val_loss", "grad_norm"};
    for (const auto& r : history.records)
        table.rows.push_back({std::to_string(r.iter), csv::format_double(r.train_loss), csv::format_double(r.val_loss),
                              csv::format_double(r.grad_norm)});
    csv::write(path, table);
}

}  // namespace ninn::training
