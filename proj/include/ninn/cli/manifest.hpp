#pragma once

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace ninn::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Provenance record written next to every command's outputs.
struct RunManifest {
    std::string command;
    std::string config_sha256;
    std::string config_text;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string started_at;
    std::string finished_at;
    std::map<std::string, std::string> inputs;   // path -> sha256
    std::map<std::string, std::string> outputs;  // path relative to the manifest -> sha256
    nlohmann::json extra = nlohmann::json::object();

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static RunManifest from_json(const nlohmann::json& j);

    /// Hashes every regular file under `dir` (except manifest.json) into outputs.
    void collect_outputs(const std::filesystem::path& dir);
    void write(const std::filesystem::path& dir) const;
    [[nodiscard]] static RunManifest read(const std::filesystem::path& dir);
};

[[nodiscard]] std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now());

}  // namespace ninn::cli
