#pragma once

#include "ninn/nn/resnet.hpp"
#include "ninn/training/bfgs.hpp"
#include "ninn/training/dataset.hpp"
#include "ninn/training/objective.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace ninn::training {

struct TrainConfig {
    double lambda = 1e-7;
    double gamma = 1.0;
    double split_fraction = 0.8;
    int patience = 400;
    int max_iters = 2000;
    double l1_delta = 1e-8;
    std::uint64_t seed = 0;
    double box_scale = 1.0;
    double tol = 1e-10;
    bool warm_start = false;  // start from the given parameters instead of box_init

    void validate() const;
};

struct TrainRecord {
    int iter = 0;
    double train_loss = 0.0;  // full training objective on the training split
    double val_loss = 0.0;    // unregularized data_loss on the validation split
    double grad_norm = 0.0;
};

struct TrainHistory {
    std::vector<TrainRecord> records;  // records[0] is the initial iterate
    int best_iter = 0;
    bool diverged = false;
    std::string status;
};

/// Layer-wise box initialization. Every neuron gets a random hyperplane through
/// the bounding box of its layer's inputs (computed on `sample_inputs`, d x M),
/// scaled so pre-activations stay in [-box_scale, box_scale] over that box.
/// Neurons are then reordered so each layer's biases ascend.
[[nodiscard]] nn::ResNetParams box_init(const nn::ResNetParams& shape, const Matrix& sample_inputs, double box_scale,
                                        std::mt19937_64& rng);

/// Trains one net with BFGS and the validation-patience rule; returns the
/// iterate with the lowest validation loss.
[[nodiscard]] nn::ResNetParams train_net(const nn::ResNetParams& start, const Matrix& train_in,
                                         const Matrix& train_out, const Matrix& val_in, const Matrix& val_out,
                                         const TrainConfig& config, TrainHistory& history);

struct TrainedSystem {
    nn::ResNetSystem system;
    std::vector<TrainHistory> histories;  // one per net
};

/// Trains every component net independently on its stencil-gathered inputs.
/// A diverging net is flagged in its history and keeps its initial parameters.
[[nodiscard]] TrainedSystem train_system(const nn::ResNetSystem& system, const Dataset& data,
                                         const TrainConfig& config, int jobs = 1);

/// Deterministic 80/20-style split: returns (train indices, validation indices).
[[nodiscard]] std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                                         double fraction,
                                                                                         std::uint64_t seed);

/// Root-mean-square one-step error of the system over the dataset.
[[nodiscard]] double one_step_rms_error(const nn::ResNetSystem& system, const Dataset& data);

/// CSV `iter,train_loss,val_loss,grad_norm`.
void write_history_csv(const std::filesystem::path& path, const TrainHistory& history);

}  // namespace ninn::training
