#include "ninn/cli/config.hpp"

#include "ninn/csv.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace ninn::cli {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"run", {"seed", "jobs"}},
        {"system", {"model", "dim", "forcing", "sigma", "rho", "beta"}},
        {"data",
         {"samples", "dt_step", "burn_in", "ic_std", "pairs_per_trajectory", "stride", "runs", "obs_start", "horizon",
          "obs_spacing", "truth_dt", "observe", "noise_std"}},
        {"train",
         {"data_dir", "label", "hidden_layers", "width", "tau", "epsilon", "lambda", "gamma", "split_fraction",
          "patience", "max_iters", "l1_delta", "box_scale", "tol", "stencil"}},
        {"assimilate",
         {"data_dir", "model_dir", "methods", "mu", "lambda_decay", "substeps", "nudging_dt", "ic_std",
          "record_substeps", "runs"}},
        {"report", {"results", "k0", "K"}},
    };
    return keys;
}

std::string trimmed(std::string s) {
    boost::algorithm::trim(s);
    return s;
}

}  // namespace

Config Config::parse(const std::string& text, const std::filesystem::path& base_dir) {
    Config c;
    c.text_ = text;
    c.base_dir_ = base_dir;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, c.tree_);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("<file>", "line " + std::to_string(e.line()) + ": " + e.message());
    }
    return c;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("<file>", "cannot read " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse(text.str(), std::filesystem::absolute(path).parent_path());
}

bool Config::has(const std::string& field) const { return tree_.get_optional<std::string>(field).has_value(); }

std::string Config::get_string(const std::string& field) const {
    const auto v = tree_.get_optional<std::string>(field);
    if (!v || trimmed(*v).empty()) throw ConfigError(field, "missing required field");
    return trimmed(*v);
}

std::string Config::get_string(const std::string& field, const std::string& fallback) const {
    return has(field) ? get_string(field) : fallback;
}

double Config::get_double(const std::string& field) const {
    const std::string raw = get_string(field);
    try {
        return csv::parse_double(raw);
    } catch (const std::exception&) {
        throw ConfigError(field, "expected a number, got '" + raw + "'");
    }
}

double Config::get_double(const std::string& field, double fallback) const {
    return has(field) ? get_double(field) : fallback;
}

long Config::get_int(const std::string& field) const {
    const std::string raw = get_string(field);
    std::size_t used = 0;
    long value = 0;
    try {
        value = std::stol(raw, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != raw.size() || raw.empty()) throw ConfigError(field, "expected an integer, got '" + raw + "'");
    return value;
}

long Config::get_int(const std::string& field, long fallback) const { return has(field) ? get_int(field) : fallback; }

bool Config::get_bool(const std::string& field, bool fallback) const {
    if (!has(field)) return fallback;
    const std::string raw = boost::algorithm::to_lower_copy(get_string(field));
    if (raw == "true" || raw == "yes" || raw == "1" || raw == "on") return true;
    if (raw == "false" || raw == "no" || raw == "0" || raw == "off") return false;
    throw ConfigError(field, "expected true or false, got '" + raw + "'");
}

std::vector<std::string> Config::get_strings(const std::string& field, const std::vector<std::string>& fallback) const {
    if (!has(field)) return fallback;
    std::vector<std::string> parts;
    const std::string raw = get_string(field);
    boost::algorithm::split(parts, raw, boost::algorithm::is_any_of(","));
    std::vector<std::string> out;
    for (auto& p : parts) {
        p = trimmed(p);
        if (p.empty()) throw ConfigError(field, "empty list element in '" + raw + "'");
        out.push_back(p);
    }
    return out;
}

std::vector<double> Config::get_doubles(const std::string& field, const std::vector<double>& fallback) const {
    if (!has(field)) return fallback;
    std::vector<double> out;
    for (const auto& p : get_strings(field, {})) {
        try {
            out.push_back(csv::parse_double(p));
        } catch (const std::exception&) {
            throw ConfigError(field, "expected a list of numbers, got '" + p + "'");
        }
    }
    return out;
}

std::filesystem::path Config::get_path(const std::string& field) const { return resolve(get_string(field)); }

std::filesystem::path Config::resolve(const std::filesystem::path& p) const {
    return p.is_absolute() || base_dir_.empty() ? p : base_dir_ / p;
}

void Config::check_known_keys() const {
    const auto& keys = known_keys();
    for (const auto& [section, body] : tree_) {
        const auto it = keys.find(section);
        if (it == keys.end()) {
            if (body.empty()) throw ConfigError(section, "key outside any section");
            throw ConfigError(section, "unknown section");
        }
        for (const auto& [key, value] : body)
            if (!it->second.contains(key)) throw ConfigError(section + "." + key, "unknown key");
    }
}

long require_positive(const Config& config, const std::string& field, long fallback) {
    const long v = config.get_int(field, fallback);
    if (v < 1) throw ConfigError(field, "must be a positive integer, got " + std::to_string(v));
    return v;
}

}  // namespace ninn::cli
