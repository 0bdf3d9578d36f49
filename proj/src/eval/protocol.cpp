#include "ninn/eval/protocol.hpp"

#include "ninn/csv.hpp"
#include "ninn/parallel.hpp"

#include <cmath>

namespace ninn::eval {

using assimilation::Method;

ProtocolConfig ProtocolConfig::defaults_for(const dynamics::OdeSpec& spec) {
    ProtocolConfig config;
    config.spec = spec;
    config.K = std::holds_alternative<dynamics::Lorenz96>(spec.model) ? 200 : 100;
    config.obs_pattern = assimilation::ObservationOperator::all(spec.dim());
    config.methods = assimilation::all_methods();
    return config;
}

void ProtocolConfig::validate() const {
    spec.validate();
    if (k0 < 0 || K <= k0) throw std::invalid_argument("protocol: need K > k0 >= 0");
    if (obs_pattern.state_dim() != spec.dim()) throw DimensionError("protocol: observation pattern dimension");
    if (substeps < 1) throw std::invalid_argument("protocol: substeps must be >= 1");
    for (double mu : mu_grid)
        if (!(mu >= 0.0)) throw std::invalid_argument("protocol: mu grid values must be >= 0");
    for (double lam : lambda_grid)
        if (!(lam >= 0.0)) throw std::invalid_argument("protocol: lambda grid values must be >= 0");
}

std::optional<RmseRow> RmseTable::best(const std::string& method, const std::string& net_label) const {
    std::optional<RmseRow> out;
    for (const auto& row : rows) {
        if (row.method != method || row.incomplete) continue;
        if (!net_label.empty() && row.net_label != net_label) continue;
        if (!out || row.rmse < out->rmse) out = row;
    }
    return out;
}

Vector wrong_initial_condition(int dim, double ic_std, std::uint64_t seed, std::size_t run) {
    // Salted so the wrong ICs never coincide with the truth ICs of the same seed.
    dynamics::Rng rng(dynamics::derive_seed(seed ^ 0x5bd1e995a5a5a5a5ULL, run));
    return dynamics::gaussian_state(dim, 0.0, ic_std, rng);
}

std::vector<RunCheckpoints> run_cell(const ProtocolConfig& config, Method method, const nn::ResNetSystem* system,
                                     double mu, double lambda_decay,
                                     const std::vector<dynamics::ReferenceRun>& truth) {
    std::vector<RunCheckpoints> out(truth.size());
    parallel_for(truth.size(), config.jobs, [&](std::size_t n) {
        const auto stream = assimilation::make_stream(truth[n].checkpoints, config.obs_pattern);
        const Vector w0 = wrong_initial_condition(config.spec.dim(), config.ic_std, config.seed, n);
        assimilation::AssimilationOptions options;
        options.record_substeps = false;
        assimilation::AssimilationResult result;
        if (method == Method::Nudging) {
            result = assimilation::classic_nudging(config.spec, stream, config.obs_pattern, mu, w0, config.nudging_dt,
                                                   options);
        } else {
            if (!system) throw std::invalid_argument("run_cell: method needs a trained system");
            const assimilation::NudgeSchedule schedule{mu, lambda_decay, config.substeps};
            result = assimilation::run_assimilation(method, *system, stream, config.obs_pattern, schedule, w0, options);
        }
        out[n] = std::move(result.checkpoint_states);
    });
    return out;
}

RmseTable run_protocol(const ProtocolConfig& config, const std::vector<LabeledSystem>& systems,
                       const std::vector<dynamics::ReferenceRun>& truth) {
    config.validate();
    if (truth.empty()) throw std::invalid_argument("run_protocol: no truth runs");
    std::vector<RunCheckpoints> ref;
    for (const auto& run : truth) ref.push_back(run.checkpoints.states);

    RmseTable table;
    const std::string system_name = config.spec.name();
    const std::string pattern = config.obs_pattern.label();
    auto add = [&](const std::string& label, Method method, const nn::ResNetSystem* system, double mu, double lam) {
        const auto alg = run_cell(config, method, system, mu, lam, truth);
        table.rows.push_back({system_name, label, to_string(method), pattern, mu, lam, rmse(alg, ref, config.k0, config.K)});
    };

    for (Method method : config.methods) {
        switch (method) {
            case Method::Nudging:
                for (double mu : config.mu_grid) add("ode", method, nullptr, mu, 0.0);
                break;
            case Method::FreeRun:
            case Method::DirectObs:
                for (const auto& s : systems) add(s.label, method, &s.system, 0.0, 0.0);
                break;
            case Method::Ninn1:
            case Method::Ninn2Plain:
            case Method::Ninn2Lookahead:
                for (const auto& s : systems)
                    for (double mu : config.mu_grid)
                        for (double lam : config.lambda_grid) add(s.label, method, &s.system, mu, lam);
                break;
        }
    }
    return table;
}

void write_rmse_table(const std::filesystem::path& path, const RmseTable& table) {
    csv::Table out;
    out.header = {"system", "net_label", "method", "obs_pattern", "mu", "lambda_decay", "rmse"};
    for (const auto& r : table.rows) {
        const std::string value = r.incomplete ? "incomplete" : (std::isfinite(r.rmse) ? csv::format_double(r.rmse) : "Inf");
        out.rows.push_back({r.system, r.net_label, r.method, r.obs_pattern, csv::format_double(r.mu),
                            csv::format_double(r.lambda_decay), value});
    }
    csv::write(path, out);
}

RmseTable read_rmse_table(const std::filesystem::path& path) {
    const auto in = csv::read(path);
    if (in.header.size() != 7 || in.header[0] != "system" || in.header[6] != "rmse")
        throw std::runtime_error(path.string() + ": not an rmse table");
    RmseTable table;
    for (const auto& c : in.rows) {
        RmseRow r{c[0], c[1], c[2], c[3], csv::parse_double(c[4]), csv::parse_double(c[5]), 0.0, false};
        if (c[6] == "incomplete") r.incomplete = true;
        else r.rmse = csv::parse_double(c[6]);
        table.rows.push_back(std::move(r));
    }
    return table;
}

}  // namespace ninn::eval
