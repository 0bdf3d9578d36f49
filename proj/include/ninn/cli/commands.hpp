#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace ninn::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kConfig = 2, kData = 3, kSchedule = 4 };

struct CommandOptions {
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;  // overrides run.seed
    int jobs = 1;
};

// Each command throws on failure; run_command maps exceptions to exit codes.
void cmd_gen_data(const CommandOptions& options);
void cmd_train(const CommandOptions& options);
void cmd_assimilate(const CommandOptions& options);
/// Returns kData when some rows are incomplete.
int cmd_report(const CommandOptions& options);

/// Dispatches by name and translates exceptions into the exit-code contract,
/// printing a one-line message to stderr.
int run_command(const std::string& name, const CommandOptions& options);

/// Seed of an independent random stream derived from the master seed.
enum class SeedStream : std::uint64_t { Dataset = 1, Truth = 2, Training = 3, Assimilation = 4, Noise = 5 };
[[nodiscard]] std::uint64_t stream_seed(std::uint64_t master, SeedStream stream);

}  // namespace ninn::cli
