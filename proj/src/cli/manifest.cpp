#include "ninn/cli/manifest.hpp"

#include "ninn/digest.hpp"

#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace ninn::cli {

namespace fs = std::filesystem;

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

nlohmann::json RunManifest::to_json() const {
    return {{"command", command},
            {"tool_version", kToolVersion},
            {"config_sha256", config_sha256},
            {"config", config_text},
            {"seed", seed},
            {"jobs", jobs},
            {"started_at", started_at},
            {"finished_at", finished_at},
            {"inputs", inputs},
            {"outputs", outputs},
            {"extra", extra}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config_sha256 = j.at("config_sha256").get<std::string>();
    m.config_text = j.value("config", std::string{});
    m.seed = j.at("seed").get<std::uint64_t>();
    m.jobs = j.value("jobs", 1);
    m.started_at = j.value("started_at", std::string{});
    m.finished_at = j.value("finished_at", std::string{});
    m.inputs = j.value("inputs", std::map<std::string, std::string>{});
    m.outputs = j.value("outputs", std::map<std::string, std::string>{});
    m.extra = j.value("extra", nlohmann::json::object());
    return m;
}

void RunManifest::collect_outputs(const fs::path& dir) {
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().filename() == "manifest.json") continue;
        outputs[fs::relative(entry.path(), dir).generic_string()] = file_sha256_hex(entry.path());
    }
}

void RunManifest::write(const fs::path& dir) const {
    const fs::path path = dir / "manifest.json";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_json().dump(2) << '\n';
}

RunManifest RunManifest::read(const fs::path& dir) {
    const fs::path path = dir / "manifest.json";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return from_json(nlohmann::json::parse(in));
}

}  // namespace ninn::cli
