#pragma once

#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ninn::cli {

/// Invalid or missing configuration; `field()` is "section.key".
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& message)
        : std::runtime_error("config field '" + field + "': " + message), field_(field) {}

    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Missing or malformed input artifact (dataset, model, truth, result files).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// INI experiment file. Keys are addressed as "section.key"; relative paths
/// resolve against the directory holding the file.
class Config {
public:
    [[nodiscard]] static Config load(const std::filesystem::path& path);
    [[nodiscard]] static Config parse(const std::string& text, const std::filesystem::path& base_dir = {});

    [[nodiscard]] const std::string& text() const { return text_; }
    [[nodiscard]] bool has(const std::string& field) const;

    [[nodiscard]] std::string get_string(const std::string& field) const;
    [[nodiscard]] std::string get_string(const std::string& field, const std::string& fallback) const;
    [[nodiscard]] double get_double(const std::string& field) const;
    [[nodiscard]] double get_double(const std::string& field, double fallback) const;
    [[nodiscard]] long get_int(const std::string& field) const;
    [[nodiscard]] long get_int(const std::string& field, long fallback) const;
    [[nodiscard]] bool get_bool(const std::string& field, bool fallback) const;
    [[nodiscard]] std::vector<double> get_doubles(const std::string& field, const std::vector<double>& fallback) const;
    [[nodiscard]] std::vector<std::string> get_strings(const std::string& field,
                                                       const std::vector<std::string>& fallback) const;
    [[nodiscard]] std::filesystem::path get_path(const std::string& field) const;
    [[nodiscard]] std::filesystem::path resolve(const std::filesystem::path& p) const;

    /// Rejects sections or keys outside the known set (catches typos).
    void check_known_keys() const;

private:
    boost::property_tree::ptree tree_;
    std::string text_;
    std::filesystem::path base_dir_;
};

/// Positive integer check shared by the commands.
long require_positive(const Config& config, const std::string& field, long fallback);

}  // namespace ninn::cli
