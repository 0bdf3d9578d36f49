#pragma once

#include "ninn/assimilation/observation.hpp"
#include "ninn/assimilation/runner.hpp"
#include "ninn/dynamics/datagen.hpp"
#include "ninn/eval/rmse.hpp"
#include "ninn/nn/resnet.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ninn::eval {

struct ProtocolConfig {
    dynamics::OdeSpec spec;
    int k0 = 50;
    int K = 100;  // 100 for Lorenz 63, 200 for Lorenz 96
    assimilation::ObservationOperator obs_pattern;
    std::vector<assimilation::Method> methods;
    std::vector<double> mu_grid{1, 2, 5, 10, 20, 50, 100};
    std::vector<double> lambda_grid{0.2, 1.0, 3.0};
    int substeps = 10;
    double nudging_dt = 1e-3;
    double ic_std = 10.0;
    std::uint64_t seed = 0;  // drives the wrong initial conditions
    int jobs = 1;

    /// Lorenz 63: K = 100; Lorenz 96: K = 200.
    [[nodiscard]] static ProtocolConfig defaults_for(const dynamics::OdeSpec& spec);
    void validate() const;
};

struct LabeledSystem {
    std::string label;
    nn::ResNetSystem system;
};

struct RmseRow {
    std::string system;
    std::string net_label;
    std::string method;
    std::string obs_pattern;
    double mu = 0.0;
    double lambda_decay = 0.0;
    double rmse = 0.0;
    bool incomplete = false;
};

struct RmseTable {
    std::vector<RmseRow> rows;

    /// Smallest RMSE over the rows matching method (and net label when given).
    [[nodiscard]] std::optional<RmseRow> best(const std::string& method, const std::string& net_label = {}) const;
};

/// Wrong initial condition for run `run`: Gaussian(0, ic_std) from a stream
/// independent of the truth ICs.
[[nodiscard]] Vector wrong_initial_condition(int dim, double ic_std, std::uint64_t seed, std::size_t run);

/// Checkpoint states of one (method, system, mu, Lambda) cell over all truth runs.
[[nodiscard]] std::vector<RunCheckpoints> run_cell(const ProtocolConfig& config, assimilation::Method method,
                                                   const nn::ResNetSystem* system, double mu, double lambda_decay,
                                                   const std::vector<dynamics::ReferenceRun>& truth);

/// Runs every configured method on every system (classic nudging on the ODE),
/// sweeping the mu/Lambda grid for the NINN methods and mu for nudging.
[[nodiscard]] RmseTable run_protocol(const ProtocolConfig& config, const std::vector<LabeledSystem>& systems,
                                     const std::vector<dynamics::ReferenceRun>& truth);

/// Columns: system,net_label,method,obs_pattern,mu,lambda_decay,rmse.
/// Non-finite RMSE renders as "Inf"; incomplete rows as "incomplete".
void write_rmse_table(const std::filesystem::path& path, const RmseTable& table);
[[nodiscard]] RmseTable read_rmse_table(const std::filesystem::path& path);

}  // namespace ninn::eval
