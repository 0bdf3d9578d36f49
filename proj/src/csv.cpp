#include "ninn/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ninn::csv {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    std::string t;
    for (char c : text)
        if (c != ' ' && c != '\t' && c != '\r') t.push_back(c);
    if (t == "inf" || t == "Inf" || t == "+inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf" || t == "-Inf") return -std::numeric_limits<double>::infinity();
    if (t == "nan" || t == "NaN") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
        throw std::invalid_argument("not a number: '" + text + "'");
    return v;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Table table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            table.comments.push_back(line.substr(line.find_first_not_of("# ") == std::string::npos
                                                     ? line.size()
                                                     : line.find_first_not_of("# ")));
            continue;
        }
        auto cells = split_line(line);
        if (!have_header) {
            table.header = std::move(cells);
            have_header = true;
        } else {
            if (cells.size() != table.header.size())
                throw std::runtime_error(path.string() + ": row has " + std::to_string(cells.size()) +
                                         " cells, header has " + std::to_string(table.header.size()));
            table.rows.push_back(std::move(cells));
        }
    }
    return table;
}

void write(const std::filesystem::path& path, const Table& table) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& c : table.comments) out << "# " << c << '\n';
    auto emit = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
    };
    emit(table.header);
    for (const auto& row : table.rows) emit(row);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace ninn::csv
