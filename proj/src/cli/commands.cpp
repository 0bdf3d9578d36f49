#include "ninn/cli/commands.hpp"

#include "ninn/assimilation/runner.hpp"
#include "ninn/cli/config.hpp"
#include "ninn/cli/manifest.hpp"
#include "ninn/csv.hpp"
#include "ninn/digest.hpp"
#include "ninn/dynamics/datagen.hpp"
#include "ninn/eval/protocol.hpp"
#include "ninn/eval/rmse.hpp"
#include "ninn/nn/model_io.hpp"
#include "ninn/parallel.hpp"
#include "ninn/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>

namespace ninn::cli {

namespace fs = std::filesystem;
using assimilation::Method;
using assimilation::ObservationOperator;
using nlohmann::json;

std::uint64_t stream_seed(std::uint64_t master, SeedStream stream) {
    // Distinct top bits keep per-run indices of different streams apart.
    return master ^ (static_cast<std::uint64_t>(stream) << 56);
}

namespace {

struct Context {
    Config config;
    std::uint64_t seed = 0;
    int jobs = 1;
    fs::path out;
    RunManifest manifest;
};

Context begin(const CommandOptions& options, const std::string& command) {
    if (options.jobs < 1) throw ConfigError("run.jobs", "--jobs must be >= 1");
    Context ctx{Config::load(options.config), 0, options.jobs, options.out, {}};
    ctx.config.check_known_keys();
    if (options.seed) {
        ctx.seed = *options.seed;
    } else {
        const long s = ctx.config.get_int("run.seed");
        if (s < 0) throw ConfigError("run.seed", "must be >= 0");
        ctx.seed = static_cast<std::uint64_t>(s);
    }
    fs::create_directories(ctx.out);
    ctx.manifest.command = command;
    ctx.manifest.config_text = ctx.config.text();
    ctx.manifest.config_sha256 = sha256_hex(ctx.config.text());
    ctx.manifest.seed = ctx.seed;
    ctx.manifest.jobs = ctx.jobs;
    ctx.manifest.started_at = utc_timestamp();
    return ctx;
}

void finish(RunManifest& manifest, const fs::path& dir) {
    manifest.collect_outputs(dir);
    manifest.finished_at = utc_timestamp();
    manifest.write(dir);
}

void record_input(RunManifest& manifest, const fs::path& path) {
    manifest.inputs[fs::absolute(path).lexically_normal().generic_string()] = file_sha256_hex(path);
}

dynamics::OdeSpec ode_from(const Config& config) {
    const std::string model = config.get_string("system.model");
    dynamics::OdeSpec spec;
    if (model == "lorenz63") {
        dynamics::Lorenz63 l;
        l.sigma = config.get_double("system.sigma", l.sigma);
        l.rho = config.get_double("system.rho", l.rho);
        l.beta = config.get_double("system.beta", l.beta);
        if (config.has("system.dim") && config.get_int("system.dim") != 3)
            throw ConfigError("system.dim", "lorenz63 has dimension 3");
        spec.model = l;
    } else if (model == "lorenz96") {
        dynamics::Lorenz96 l;
        l.forcing = config.get_double("system.forcing", l.forcing);
        l.dim = static_cast<int>(config.get_int("system.dim", l.dim));
        if (l.dim < 4) throw ConfigError("system.dim", "lorenz96 needs dim >= 4");
        spec.model = l;
    } else {
        throw ConfigError("system.model", "expected lorenz63 or lorenz96, got '" + model + "'");
    }
    return spec;
}

ObservationOperator observation_from(const Config& config, int dim) {
    const auto items = config.get_strings("data.observe", {"all"});
    if (items.size() == 1 && items[0] == "all") return ObservationOperator::all(dim);
    std::vector<int> idx;
    for (const auto& s : items) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size() || v < 1 || v > dim)
            throw ConfigError("data.observe", "expected 'all' or 1-based components in 1.." + std::to_string(dim) +
                                                  ", got '" + s + "'");
        idx.push_back(v - 1);
    }
    return ObservationOperator(idx, dim);
}

std::string run_file(std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "run_%03zu.csv", n);
    return buf;
}

std::vector<std::string> state_header(const std::string& prefix, int dim) {
    std::vector<std::string> h{"t"};
    for (int i = 1; i <= dim; ++i) h.push_back(prefix + std::to_string(i));
    return h;
}

// ---- data artifacts ----------------------------------------------------------

struct TruthSet {
    double spacing = 0.0;
    std::vector<dynamics::Trajectory> runs;
    std::vector<fs::path> files;
};

double comment_value(const csv::Table& table, const std::string& key, const fs::path& path) {
    const std::string prefix = key + "=";
    for (const auto& c : table.comments)
        if (c.rfind(prefix, 0) == 0) return csv::parse_double(c.substr(prefix.size()));
    throw DataError(path.string() + ": missing '# " + prefix + "' line");
}

csv::Table read_table(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw DataError("missing input file " + path.string());
    try {
        return csv::read(path);
    } catch (const std::invalid_argument& e) {
        throw DataError(path.string() + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw DataError(e.what());
    }
}

std::vector<fs::path> run_files(const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) throw DataError("missing directory " + dir.string());
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.rfind("run_", 0) == 0 && e.path().extension() == ".csv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

dynamics::Trajectory read_states(const csv::Table& table, const fs::path& path) {
    dynamics::Trajectory traj;
    for (const auto& row : table.rows) {
        try {
            traj.times.push_back(csv::parse_double(row.at(0)));
            Vector x(static_cast<Eigen::Index>(row.size() - 1));
            for (std::size_t c = 1; c < row.size(); ++c) x[static_cast<Eigen::Index>(c - 1)] = csv::parse_double(row[c]);
            traj.states.push_back(std::move(x));
        } catch (const std::invalid_argument& e) {
            throw DataError(path.string() + ": " + e.what());
        }
    }
    return traj;
}

TruthSet read_truth(const fs::path& data_dir) {
    TruthSet set;
    set.files = run_files(data_dir / "truth");
    if (set.files.empty()) throw DataError("no truth runs under " + (data_dir / "truth").string());
    for (const auto& f : set.files) {
        const auto table = read_table(f);
        set.spacing = comment_value(table, "obs_spacing", f);
        set.runs.push_back(read_states(table, f));
        if (set.runs.back().size() < 2) throw DataError(f.string() + ": needs at least two checkpoints");
        if (set.runs.back().states.front().size() != set.runs.front().states.front().size())
            throw DimensionError(f.string() + ": state dimension differs from the first truth run");
    }
    return set;
}

ObservationOperator parse_observation_header(const std::vector<std::string>& header, int dim, const fs::path& path) {
    if (header.empty() || header[0] != "t") throw DataError(path.string() + ": expected header t,x_i,...");
    std::vector<int> idx;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const auto& h = header[c];
        if (h.rfind("x_", 0) != 0) throw DataError(path.string() + ": bad column '" + h + "'");
        const int i = std::stoi(h.substr(2)) - 1;
        if (i < 0 || i >= dim) throw DimensionError(path.string() + ": observed component " + h + " outside the state");
        idx.push_back(i);
    }
    return ObservationOperator(idx, dim);
}

// ---- gen-data ----------------------------------------------------------------

}  // namespace

void cmd_gen_data(const CommandOptions& options) {
    auto ctx = begin(options, "gen-data");
    const auto& cfg = ctx.config;
    const auto spec = ode_from(cfg);
    const int dim = spec.dim();

    const auto samples = require_positive(cfg, "data.samples", 15000);
    const double dt_step = cfg.get_double("data.dt_step", 1e-2);
    if (!(dt_step > 0)) throw ConfigError("data.dt_step", "must be positive");
    dynamics::TrainingSetOptions topts;
    topts.burn_in = cfg.get_double("data.burn_in", topts.burn_in);
    topts.ic_std = cfg.get_double("data.ic_std", topts.ic_std);
    topts.pairs_per_trajectory = static_cast<int>(require_positive(cfg, "data.pairs_per_trajectory", topts.pairs_per_trajectory));
    topts.stride = static_cast<int>(require_positive(cfg, "data.stride", 1));
    if (topts.burn_in < 0) throw ConfigError("data.burn_in", "must be >= 0");
    if (!(topts.ic_std > 0)) throw ConfigError("data.ic_std", "must be positive");

    auto protocol = dynamics::ReferenceProtocol::for_spec(spec);
    protocol.obs_start = cfg.get_double("data.obs_start", protocol.obs_start);
    protocol.horizon = cfg.get_double("data.horizon", protocol.horizon);
    protocol.obs_spacing = cfg.get_double("data.obs_spacing", protocol.obs_spacing);
    protocol.dt = cfg.get_double("data.truth_dt", protocol.dt);
    protocol.ic_std = topts.ic_std;
    if (protocol.obs_start < 0) throw ConfigError("data.obs_start", "must be >= 0");
    if (!(protocol.horizon > protocol.obs_start)) throw ConfigError("data.horizon", "must exceed data.obs_start");
    if (!(protocol.obs_spacing > 0)) throw ConfigError("data.obs_spacing", "must be positive");
    if (!(protocol.dt > 0)) throw ConfigError("data.truth_dt", "must be positive");
    const auto runs = static_cast<std::size_t>(require_positive(cfg, "data.runs", 10));
    const auto op = observation_from(cfg, dim);
    const double noise = cfg.get_double("data.noise_std", 0.0);
    if (!(noise >= 0)) throw ConfigError("data.noise_std", "must be >= 0");

    dynamics::Rng rng(stream_seed(ctx.seed, SeedStream::Dataset));
    const auto data = dynamics::make_training_set(spec, static_cast<std::size_t>(samples), dt_step, rng, topts);
    training::write_dataset_csv(ctx.out / "dataset.csv", data);

    const auto truth = dynamics::make_reference_runs(spec, runs, stream_seed(ctx.seed, SeedStream::Truth), protocol,
                                                     ctx.jobs);
    fs::create_directories(ctx.out / "truth");
    fs::create_directories(ctx.out / "observations");
    const std::string spacing = "obs_spacing=" + csv::format_double(protocol.obs_spacing);
    for (std::size_t n = 0; n < truth.size(); ++n) {
        csv::Table t;
        t.comments = {spacing};
        t.header = state_header("x_", dim);
        for (std::size_t k = 0; k < truth[n].checkpoints.size(); ++k) {
            std::vector<std::string> row{csv::format_double(truth[n].checkpoints.times[k])};
            for (double v : truth[n].checkpoints.states[k]) row.push_back(csv::format_double(v));
            t.rows.push_back(std::move(row));
        }
        csv::write(ctx.out / "truth" / run_file(n), t);

        const auto stream = assimilation::make_stream(truth[n].checkpoints, op, noise,
                                                      dynamics::derive_seed(stream_seed(ctx.seed, SeedStream::Noise), n));
        csv::Table o;
        o.comments = {spacing};
        o.header = {"t"};
        for (int i : op.observed()) o.header.push_back("x_" + std::to_string(i + 1));
        for (const auto& e : stream.entries) {
            std::vector<std::string> row{csv::format_double(e.time)};
            for (double v : e.values) row.push_back(csv::format_double(v));
            o.rows.push_back(std::move(row));
        }
        csv::write(ctx.out / "observations" / run_file(n), o);
    }

    ctx.manifest.extra = {{"system", spec.name()},  {"state_dim", dim},         {"samples", samples},
                          {"dt_step", dt_step},     {"runs", runs},             {"observe", op.label()},
                          {"obs_spacing", protocol.obs_spacing}, {"checkpoints", protocol.checkpoint_count()}};
    finish(ctx.manifest, ctx.out);
}

// ---- train -------------------------------------------------------------------

void cmd_train(const CommandOptions& options) {
    auto ctx = begin(options, "train");
    const auto& cfg = ctx.config;
    const auto spec = ode_from(cfg);
    const int dim = spec.dim();

    const fs::path data_file = cfg.get_path("train.data_dir") / "dataset.csv";
    if (!fs::is_regular_file(data_file)) throw DataError("missing dataset " + data_file.string());
    training::Dataset data;
    try {
        data = training::read_dataset_csv(data_file);
    } catch (const DimensionError&) {
        throw;
    } catch (const std::exception& e) {
        throw DataError(data_file.string() + ": " + e.what());
    }
    record_input(ctx.manifest, data_file);
    if (data.size() == 0) throw DataError(data_file.string() + ": no samples");
    if (data.state_dim() != dim)
        throw DimensionError("dataset has state dimension " + std::to_string(data.state_dim()) + " but system." +
                             "model " + spec.name() + " has " + std::to_string(dim));

    const int hidden = static_cast<int>(require_positive(cfg, "train.hidden_layers", 5));
    if (hidden < 2) throw ConfigError("train.hidden_layers", "must be >= 2");
    const int width = static_cast<int>(require_positive(cfg, "train.width", 15));
    nn::ActivationSpec act{cfg.get_double("train.epsilon", 0.1)};
    if (!(act.epsilon > 0)) throw ConfigError("train.epsilon", "must be positive");
    const double tau = cfg.get_double("train.tau", 0.0);
    if (tau < 0) throw ConfigError("train.tau", "must be >= 0 (0 selects the default)");

    const bool is96 = std::holds_alternative<dynamics::Lorenz96>(spec.model);
    const std::string stencil = cfg.get_string("train.stencil", is96 ? "lorenz96" : "full");
    nn::ResNetSystem shape;
    shape.state_dim = dim;
    shape.dt_step = data.dt_step;
    if (stencil == "full") shape.stencils = nn::ResNetSystem::full_stencils(dim);
    else if (stencil == "lorenz96") {
        if (dim < 4) throw ConfigError("train.stencil", "lorenz96 stencil needs dim >= 4");
        shape.stencils = nn::ResNetSystem::lorenz96_stencils(dim);
    } else throw ConfigError("train.stencil", "expected full or lorenz96, got '" + stencil + "'");
    for (const auto& s : shape.stencils)
        shape.nets.push_back(nn::ResNetParams::zeros(static_cast<int>(s.size()), 1, hidden + 1, width, tau, act));

    training::TrainConfig tc;
    tc.lambda = cfg.get_double("train.lambda", tc.lambda);
    tc.gamma = cfg.get_double("train.gamma", tc.gamma);
    tc.split_fraction = cfg.get_double("train.split_fraction", tc.split_fraction);
    tc.patience = static_cast<int>(require_positive(cfg, "train.patience", tc.patience));
    tc.max_iters = static_cast<int>(require_positive(cfg, "train.max_iters", tc.max_iters));
    tc.l1_delta = cfg.get_double("train.l1_delta", tc.l1_delta);
    tc.box_scale = cfg.get_double("train.box_scale", tc.box_scale);
    tc.tol = cfg.get_double("train.tol", tc.tol);
    tc.seed = stream_seed(ctx.seed, SeedStream::Training);
    if (tc.lambda < 0) throw ConfigError("train.lambda", "must be >= 0");
    if (tc.gamma < 0) throw ConfigError("train.gamma", "must be >= 0");
    if (!(tc.split_fraction > 0 && tc.split_fraction < 1)) throw ConfigError("train.split_fraction", "must be in (0, 1)");
    if (!(tc.l1_delta > 0)) throw ConfigError("train.l1_delta", "must be positive");
    if (!(tc.box_scale > 0)) throw ConfigError("train.box_scale", "must be positive");
    if (!(tc.tol >= 0)) throw ConfigError("train.tol", "must be >= 0");

    const auto trained = training::train_system(shape, data, tc, ctx.jobs);
    nn::save_model(ctx.out / "model.bin", trained.system);
    fs::create_directories(ctx.out / "history");
    json nets = json::array();
    for (std::size_t i = 0; i < trained.histories.size(); ++i) {
        const auto& h = trained.histories[i];
        training::write_history_csv(ctx.out / "history" / ("net_" + std::to_string(i) + ".csv"), h);
        nets.push_back({{"net", i}, {"best_iter", h.best_iter}, {"diverged", h.diverged}, {"status", h.status}});
    }
    ctx.manifest.extra = {{"system", spec.name()},
                          {"label", cfg.get_string("train.label", "resnet")},
                          {"hidden_layers", hidden},
                          {"depth", hidden + 1},
                          {"width", width},
                          {"dt_step", data.dt_step},
                          {"one_step_rms", training::one_step_rms_error(trained.system, data)},
                          {"nets", nets}};
    finish(ctx.manifest, ctx.out);
}

// ---- assimilate --------------------------------------------------------------

namespace {

struct Cell {
    Method method;
    double mu;
    double lambda_decay;

    [[nodiscard]] std::string name() const {
        return to_string(method) + "_mu" + csv::format_double(mu) + "_lam" + csv::format_double(lambda_decay);
    }
};

}  // namespace

void cmd_assimilate(const CommandOptions& options) {
    auto ctx = begin(options, "assimilate");
    const auto& cfg = ctx.config;
    const auto spec = ode_from(cfg);
    const int dim = spec.dim();

    std::vector<Method> methods;
    for (const auto& name : cfg.get_strings("assimilate.methods", {"all"})) {
        if (name == "all") {
            methods = assimilation::all_methods();
            continue;
        }
        try {
            methods.push_back(assimilation::parse_method(name));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("assimilate.methods", e.what());
        }
    }
    const auto mu_grid = cfg.get_doubles("assimilate.mu", {1, 2, 5, 10, 20, 50, 100});
    const auto lambda_grid = cfg.get_doubles("assimilate.lambda_decay", {0.2, 1.0, 3.0});
    for (double mu : mu_grid)
        if (!(mu >= 0) || !std::isfinite(mu)) throw ConfigError("assimilate.mu", "values must be finite and >= 0");
    for (double lam : lambda_grid)
        if (!(lam >= 0)) throw ConfigError("assimilate.lambda_decay", "values must be >= 0");
    if (mu_grid.empty()) throw ConfigError("assimilate.mu", "empty grid");
    if (lambda_grid.empty()) throw ConfigError("assimilate.lambda_decay", "empty grid");
    const int substeps = static_cast<int>(require_positive(cfg, "assimilate.substeps", 10));
    const double nudging_dt = cfg.get_double("assimilate.nudging_dt", 1e-3);
    const double ic_std = cfg.get_double("assimilate.ic_std", 10.0);
    const bool record_substeps = cfg.get_bool("assimilate.record_substeps", false);
    if (!(nudging_dt > 0)) throw ConfigError("assimilate.nudging_dt", "must be positive");
    if (!(ic_std > 0)) throw ConfigError("assimilate.ic_std", "must be positive");

    const fs::path data_dir = fs::absolute(cfg.get_path("assimilate.data_dir")).lexically_normal();
    auto truth = read_truth(data_dir);
    if (cfg.has("assimilate.runs")) {
        const auto limit = static_cast<std::size_t>(require_positive(cfg, "assimilate.runs", 1));
        if (limit < truth.runs.size()) {
            truth.runs.resize(limit);
            truth.files.resize(limit);
        }
    }
    for (const auto& f : truth.files) record_input(ctx.manifest, f);
    if (truth.runs.front().states.front().size() != dim)
        throw DimensionError("truth runs have state dimension " +
                             std::to_string(truth.runs.front().states.front().size()) + " but " + spec.name() +
                             " has " + std::to_string(dim));

    const bool needs_model = std::any_of(methods.begin(), methods.end(), [](Method m) { return m != Method::Nudging; });
    const bool needs_obs = std::any_of(methods.begin(), methods.end(), [](Method m) { return m != Method::FreeRun; });

    nn::ResNetSystem system;
    if (needs_model) {
        const fs::path model_file = cfg.get_path("assimilate.model_dir") / "model.bin";
        if (!fs::is_regular_file(model_file)) throw DataError("missing model " + model_file.string());
        try {
            system = nn::load_model(model_file);
        } catch (const nn::ModelDimensionError& e) {
            throw DimensionError(e.what());
        }
        record_input(ctx.manifest, model_file);
        if (system.state_dim != dim)
            throw DimensionError("model has state dimension " + std::to_string(system.state_dim) + " but " +
                                 spec.name() + " has " + std::to_string(dim));
        const double ratio = truth.spacing / system.dt_step;
        if (std::abs(ratio - substeps) > 1e-9 * std::max(1.0, ratio))
            throw assimilation::ScheduleError("assimilate.substeps x model dt_step (" + std::to_string(substeps) +
                                              " x " + csv::format_double(system.dt_step) +
                                              ") does not equal the observation spacing " +
                                              csv::format_double(truth.spacing));
    }
    if (std::any_of(methods.begin(), methods.end(), [](Method m) { return m == Method::Nudging; })) {
        const double ratio = truth.spacing / nudging_dt;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
            throw assimilation::ScheduleError("assimilate.nudging_dt does not divide the observation spacing " +
                                              csv::format_double(truth.spacing));
    }

    // Streams per run; free-run only needs the observation times.
    ObservationOperator op = ObservationOperator::none(dim);
    std::vector<assimilation::ObservationStream> streams(truth.runs.size());
    std::vector<assimilation::ObservationStream> blank(truth.runs.size());
    for (std::size_t n = 0; n < truth.runs.size(); ++n) {
        blank[n].delta_t_obs = truth.spacing;
        for (double t : truth.runs[n].times) blank[n].entries.push_back({t, Vector(0)});
    }
    if (needs_obs) {
        const auto obs_files = run_files(data_dir / "observations");
        if (obs_files.size() < truth.runs.size())
            throw DataError("observation files under " + (data_dir / "observations").string() +
                            " do not cover every truth run");
        for (std::size_t n = 0; n < truth.runs.size(); ++n) {
            const auto table = read_table(obs_files[n]);
            record_input(ctx.manifest, obs_files[n]);
            const auto this_op = parse_observation_header(table.header, dim, obs_files[n]);
            if (n == 0) op = this_op;
            else if (this_op.observed() != op.observed())
                throw DataError(obs_files[n].string() + ": observed components differ between runs");
            const auto traj = read_states(table, obs_files[n]);
            if (traj.size() != truth.runs[n].size())
                throw DimensionError(obs_files[n].string() + ": observation count differs from its truth run");
            streams[n].delta_t_obs = comment_value(table, "obs_spacing", obs_files[n]);
            for (std::size_t k = 0; k < traj.size(); ++k) streams[n].entries.push_back({traj.times[k], traj.states[k]});
        }
    }

    std::vector<Cell> cells;
    for (Method m : methods) {
        switch (m) {
            case Method::Nudging:
                for (double mu : mu_grid) cells.push_back({m, mu, 0.0});
                break;
            case Method::FreeRun:
            case Method::DirectObs: cells.push_back({m, 0.0, 0.0}); break;
            default:
                for (double mu : mu_grid)
                    for (double lam : lambda_grid) cells.push_back({m, mu, lam});
        }
    }

    const std::string label = system.nets.empty() ? std::string("ode") : "resnet";
    std::string net_label = label;
    if (needs_model) {
        const fs::path model_manifest = cfg.get_path("assimilate.model_dir") / "manifest.json";
        if (fs::is_regular_file(model_manifest))
            net_label = RunManifest::read(model_manifest.parent_path()).extra.value("label", label);
    }

    const std::uint64_t ic_seed = stream_seed(ctx.seed, SeedStream::Assimilation);
    json cell_names = json::array();
    for (const auto& cell : cells) {
        const fs::path dir = ctx.out / "cells" / cell.name();
        fs::create_directories(dir);
        RunManifest m = ctx.manifest;
        m.started_at = utc_timestamp();
        m.outputs.clear();
        parallel_for(truth.runs.size(), ctx.jobs, [&](std::size_t n) {
            const Vector w0 = eval::wrong_initial_condition(dim, ic_std, ic_seed, n);
            assimilation::AssimilationOptions aopts;
            aopts.record_substeps = record_substeps;
            aopts.truth = &truth.runs[n].states;
            const auto& stream = cell.method == Method::FreeRun ? blank[n] : streams[n];
            const auto& cell_op = cell.method == Method::FreeRun ? ObservationOperator::none(dim) : op;
            assimilation::AssimilationResult r;
            if (cell.method == Method::Nudging)
                r = assimilation::classic_nudging(spec, stream, cell_op, cell.mu, w0, nudging_dt, aopts);
            else
                r = assimilation::run_assimilation(cell.method, system, stream, cell_op,
                                                   {cell.mu, cell.lambda_decay, substeps}, w0, aopts);

            csv::Table t;
            t.header = state_header("w_", dim);
            t.header.push_back("err_checkpoint");
            const std::size_t per_window =
                record_substeps ? r.estimates.size() / std::max<std::size_t>(1, r.checkpoint_states.size() - 1) : 1;
            for (std::size_t j = 0; j < r.estimates.size(); ++j) {
                const bool at_checkpoint = j % per_window == 0 && j / per_window < r.checkpoint_states.size();
                const std::size_t k = j / per_window;
                const Vector& w = at_checkpoint ? r.checkpoint_states[k] : r.estimates.states[j];
                std::vector<std::string> row{csv::format_double(at_checkpoint ? r.checkpoint_times[k] : r.estimates.times[j])};
                for (double v : w) row.push_back(csv::format_double(v));
                row.push_back(at_checkpoint ? csv::format_double(r.checkpoint_errors[k]) : std::string{});
                t.rows.push_back(std::move(row));
            }
            csv::write(dir / run_file(n), t);
        });
        m.extra = {{"cell", true},
                   {"system", spec.name()},
                   {"net_label", cell.method == Method::Nudging ? std::string("ode") : net_label},
                   {"method", to_string(cell.method)},
                   {"obs_pattern", cell.method == Method::FreeRun ? std::string("none") : op.label()},
                   {"mu", cell.mu},
                   {"lambda_decay", cell.lambda_decay},
                   {"substeps", substeps},
                   {"runs", truth.runs.size()},
                   {"checkpoints", truth.runs.front().size()},
                   {"truth_dir", (data_dir / "truth").generic_string()}};
        finish(m, dir);
        cell_names.push_back(cell.name());
    }
    ctx.manifest.extra = {{"cells", cell_names}, {"system", spec.name()}, {"obs_pattern", op.label()}};
    finish(ctx.manifest, ctx.out);
}

// ---- report ------------------------------------------------------------------

int cmd_report(const CommandOptions& options) {
    auto ctx = begin(options, "report");
    const auto& cfg = ctx.config;
    const auto roots = cfg.get_strings("report.results", {});
    if (roots.empty()) throw ConfigError("report.results", "missing required field");
    const long k0 = cfg.get_int("report.k0", 50);
    if (k0 < 0) throw ConfigError("report.k0", "must be >= 0");
    const long K_cfg = cfg.get_int("report.K", -1);  // -1: last checkpoint of each cell
    if (cfg.has("report.K") && K_cfg <= k0) throw ConfigError("report.K", "must exceed report.k0");

    std::vector<fs::path> cell_dirs;
    for (const auto& root : roots) {
        const fs::path abs = fs::absolute(cfg.resolve(root)).lexically_normal();
        if (!fs::is_directory(abs)) throw DataError("missing result directory " + abs.string());
        for (const auto& e : fs::recursive_directory_iterator(abs)) {
            if (!e.is_regular_file() || e.path().filename() != "manifest.json") continue;
            const auto m = RunManifest::read(e.path().parent_path());
            if (m.extra.value("cell", false)) cell_dirs.push_back(e.path().parent_path());
        }
    }
    std::sort(cell_dirs.begin(), cell_dirs.end());
    cell_dirs.erase(std::unique(cell_dirs.begin(), cell_dirs.end()), cell_dirs.end());

    eval::RmseTable table;
    std::map<std::string, std::vector<eval::RunCheckpoints>> truth_cache;
    bool partial = false;
    for (const auto& dir : cell_dirs) {
        const auto m = RunManifest::read(dir);
        const auto& x = m.extra;
        eval::RmseRow row{x.value("system", ""),   x.value("net_label", ""), x.value("method", ""),
                          x.value("obs_pattern", ""), x.value("mu", 0.0),     x.value("lambda_decay", 0.0),
                          0.0,                      false};
        const auto runs = x.value("runs", std::size_t{0});
        const auto checkpoints = x.value("checkpoints", std::size_t{0});
        const long K = K_cfg >= 0 ? K_cfg : static_cast<long>(checkpoints) - 1;
        const std::string truth_dir = x.value("truth_dir", "");
        try {
            auto& ref = truth_cache[truth_dir];
            if (ref.empty()) {
                for (const auto& f : run_files(truth_dir)) ref.push_back(read_states(read_table(f), f).states);
            }
            if (runs == 0 || ref.size() < runs || K >= static_cast<long>(checkpoints))
                throw DataError(dir.string() + ": truth or checkpoints do not cover the requested window");
            std::vector<eval::RunCheckpoints> alg, sel;
            for (std::size_t n = 0; n < runs; ++n) {
                const fs::path f = dir / run_file(n);
                const auto t = read_table(f);
                eval::RunCheckpoints states;
                const auto err_col = t.header.size() - 1;
                for (const auto& r : t.rows) {
                    if (r.size() != t.header.size() || r[err_col].empty()) continue;
                    Vector w(static_cast<Eigen::Index>(t.header.size() - 2));
                    for (std::size_t c = 1; c < err_col; ++c) w[static_cast<Eigen::Index>(c - 1)] = csv::parse_double(r[c]);
                    states.push_back(std::move(w));
                }
                if (states.size() != checkpoints) throw DataError(f.string() + ": incomplete run");
                alg.push_back(std::move(states));
                sel.push_back(ref[n]);
            }
            row.rmse = eval::rmse(alg, sel, static_cast<int>(k0), static_cast<int>(K));
        } catch (const DataError& e) {
            std::cerr << "report: " << e.what() << '\n';
            row.incomplete = true;
            partial = true;
        }
        table.rows.push_back(std::move(row));
        ctx.manifest.inputs[dir.generic_string()] = file_sha256_hex(dir / "manifest.json");
    }
    eval::write_rmse_table(ctx.out / "rmse_table.csv", table);
    ctx.manifest.extra = {{"cells", cell_dirs.size()}, {"incomplete", partial}, {"k0", k0}};
    finish(ctx.manifest, ctx.out);
    return partial ? kData : kOk;
}

int run_command(const std::string& name, const CommandOptions& options) {
    try {
        if (name == "gen-data") cmd_gen_data(options);
        else if (name == "train") cmd_train(options);
        else if (name == "assimilate") cmd_assimilate(options);
        else if (name == "report") return cmd_report(options);
        else {
            std::cerr << "error: unknown command '" << name << "'\n";
            return kConfig;
        }
        return kOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const assimilation::ScheduleError& e) {
        std::cerr << "schedule error: " << e.what() << '\n';
        return kSchedule;
    } catch (const DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << '\n';
        return kData;
    } catch (const nn::ModelFormatError& e) {
        std::cerr << "model error: " << e.what() << '\n';
        return kData;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
}

}  // namespace ninn::cli
