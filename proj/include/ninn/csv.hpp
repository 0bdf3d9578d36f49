#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ninn::csv {

/// Shortest representation that parses back to the same double; non-finite
/// values render as "inf", "-inf" or "nan".
[[nodiscard]] std::string format_double(double v);
[[nodiscard]] double parse_double(const std::string& text);

struct Table {
    std::vector<std::string> comments;  // lines starting with '#', without the marker
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

[[nodiscard]] std::vector<std::string> split_line(const std::string& line);
[[nodiscard]] Table read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const Table& table);

}  // namespace ninn::csv
