// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,5,12] [--expect-fail 3] [--work-dir DIR] [--config-dir DIR]
//
// Exit status is the number of failing criteria that were not listed in
// --expect-fail, plus any expected failure that unexpectedly passed.

#include "ninn/assimilation/feedback.hpp"
#include "ninn/assimilation/observation.hpp"
#include "ninn/assimilation/runner.hpp"
#include "ninn/cli/commands.hpp"
#include "ninn/csv.hpp"
#include "ninn/dynamics/datagen.hpp"
#include "ninn/eval/protocol.hpp"
#include "ninn/eval/rmse.hpp"
#include "ninn/nn/model_io.hpp"
#include "ninn/training/objective.hpp"
#include "ninn/training/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace ninn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double time_limit_s;  // 0: no limit stated
    std::function<Outcome()> run;
};

fs::path g_work;
fs::path g_configs;

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

Vector uniform_vector(Eigen::Index n, std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
    return v;
}

nn::ResNetParams random_net(int d, int depth, int width, std::mt19937_64& rng) {
    auto net = nn::ResNetParams::zeros(d, 1, depth, width);
    net.assign(uniform_vector(static_cast<Eigen::Index>(net.parameter_count()), rng, 0.7));
    return net;
}

// A small trained Lorenz 63 system shared by the criteria that need one.
const nn::ResNetSystem& small_trained_system() {
    static const nn::ResNetSystem system = [] {
        dynamics::Rng rng(101);
        dynamics::TrainingSetOptions opts;
        opts.burn_in = 0.0;
        opts.pairs_per_trajectory = 200;
        const auto data = dynamics::make_training_set(dynamics::OdeSpec{}, 1000, 0.01, rng, opts);
        nn::ResNetSystem shape;
        shape.state_dim = 3;
        shape.stencils = nn::ResNetSystem::full_stencils(3);
        shape.nets.assign(3, nn::ResNetParams::zeros(3, 1, 6, 15));
        training::TrainConfig config;
        config.max_iters = 150;
        config.seed = 102;
        return training::train_system(shape, data, config).system;
    }();
    return system;
}

std::vector<dynamics::ReferenceRun> short_truth(std::size_t runs, std::uint64_t seed, double span) {
    dynamics::ReferenceProtocol p;
    p.horizon = p.obs_start + span;
    return dynamics::make_reference_runs(dynamics::OdeSpec{}, runs, seed, p);
}

// ---- criteria ------------------------------------------------------------------

Outcome gradient_correctness() {
    std::mt19937_64 rng(1);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + trial % 4;
        const int width = 1 + trial % 10;
        const int depth = 3 + trial % 4;
        auto net = random_net(d, depth, width, rng);
        Matrix in(d, 8), out(1, 8);
        for (int c = 0; c < 8; ++c) {
            in.col(c) = uniform_vector(d, rng, 2.0);
            out(0, c) = uniform_vector(1, rng, 2.0)[0];
        }
        const training::TrainingObjective f(net, in, out, {1e-3, 2.0, 1e-8});
        const Vector x = net.flatten();
        Vector g;
        (void)f(x, &g);
        const Vector dir = uniform_vector(x.size(), rng, 1.0).normalized();
        const double h = 1e-6;
        const double fd = (f(x + h * dir, nullptr) - f(x - h * dir, nullptr)) / (2 * h);
        const double ad = g.dot(dir);
        worst = std::max(worst, std::abs(fd - ad) / std::max({std::abs(ad), std::abs(fd), 1e-300}));
    }
    return {worst < 1e-5, "max relative error " + fmt(worst) + " over 100 nets"};
}

Outcome rk4_order() {
    const dynamics::OdeSpec spec;
    dynamics::Rng rng(2);
    const Vector x0 = dynamics::advance(spec, dynamics::gaussian_state(3, 0, 10, rng), 20.0, 1e-3);
    const double dt = 1e-2;
    const Vector ref = dynamics::advance(spec, x0, 1.0, dt / 10);
    const double e1 = (dynamics::advance(spec, x0, 1.0, dt) - ref).norm();
    const double e2 = (dynamics::advance(spec, x0, 1.0, dt / 2) - ref).norm();
    const double order = std::log2(e1 / e2);
    return {order >= 3.7 && order <= 4.3, "observed order " + fmt(order) + " (dt = 1e-2)"};
}

Outcome nudging_contraction() {
    const dynamics::OdeSpec spec;
    const auto op = assimilation::ObservationOperator::all(3);
    int passed = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        dynamics::Rng rng(1000 + seed);
        const Vector u0 = dynamics::advance(spec, dynamics::gaussian_state(3, 0, 10, rng), 20.0, 1e-3);
        const Vector w0 = dynamics::gaussian_state(3, 0, 10, rng);
        dynamics::Trajectory truth{{0.0}, {u0}};
        for (int k = 1; k <= 500; ++k) {
            truth.times.push_back(k * 1e-2);
            truth.states.push_back(dynamics::advance(spec, truth.states.back(), 1e-2, 1e-3));
        }
        const auto stream = assimilation::make_stream(truth, op);
        assimilation::AssimilationOptions opts;
        opts.record_substeps = false;
        opts.truth = &truth.states;
        const auto r = assimilation::classic_nudging(spec, stream, op, 50.0, w0, 1e-3, opts);
        const double ratio = r.checkpoint_errors.back() / r.checkpoint_errors.front();
        worst = std::max(worst, ratio);
        passed += ratio < 1e-3;
    }
    return {passed == 10, std::to_string(passed) + "/10 seeds below 1e-3; worst error ratio at t = 5: " + fmt(worst)};
}

Outcome table_ordering() {
    const fs::path dir = g_work / "c4";
    fs::remove_all(dir);
    fs::create_directories(dir);
    fs::copy_file(g_configs / "lorenz63_x.ini", dir / "exp.ini");
    for (const auto& [cmd, out] : {std::pair{"gen-data", "data"}, {"train", "model"}, {"assimilate", "assim"},
                                   {"report", "report"}}) {
        const int code = cli::run_command(cmd, {dir / "exp.ini", dir / out, std::nullopt, 1});
        if (code != 0) return {false, std::string(cmd) + " exited with " + std::to_string(code)};
    }
    const auto table = eval::read_rmse_table(dir / "report" / "rmse_table.csv");
    const auto ninn2 = table.best("ninn2-lookahead");
    const auto ninn1 = table.best("ninn1");
    const auto free = table.best("free-run");
    if (!ninn2 || !ninn1 || !free) return {false, "missing rows in rmse_table.csv"};
    const bool pass = ninn2->rmse < 0.5 * free->rmse && ninn2->rmse <= ninn1->rmse;
    return {pass, "best NINN-2 " + fmt(ninn2->rmse) + " (mu " + fmt(ninn2->mu) + ", Lambda " +
                      fmt(ninn2->lambda_decay) + "), best NINN-1 " + fmt(ninn1->rmse) + ", free run " +
                      fmt(free->rmse)};
}

Outcome direct_observation_contract() {
    const auto& system = small_trained_system();
    const auto truth = short_truth(5, 51, 5.0);
    std::size_t checked = 0;
    bool exact = true;
    for (const auto& op : {assimilation::ObservationOperator({0}, 3), assimilation::ObservationOperator::all(3)}) {
        for (std::size_t n = 0; n < truth.size(); ++n) {
            const auto stream = assimilation::make_stream(truth[n].checkpoints, op);
            const Vector w0 = eval::wrong_initial_condition(3, 10.0, 52, n);
            const auto r = assimilation::run_assimilation(assimilation::Method::DirectObs, system, stream, op,
                                                          {0.0, 0.0, 10}, w0);
            for (std::size_t k = 0; k < stream.entries.size(); ++k) {
                const Vector& input = r.checkpoint_states[k];
                for (std::size_t j = 0; j < op.count(); ++j) {
                    const int c = op.observed()[j];
                    exact = exact && input[c] == truth[n].checkpoints.states[k][c] &&
                            input[c] == stream.entries[k].values[static_cast<Eigen::Index>(j)];
                    ++checked;
                }
            }
        }
    }
    return {exact && checked > 0, std::to_string(checked) + " observed inputs compared bitwise"};
}

Outcome rmse_oracle() {
    std::mt19937_64 rng(6);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t runs = 1 + trial % 6;
        const int len = 10 + trial, d = 1 + trial % 5, k0 = trial % 7, K = len - 1 - trial % 3;
        std::vector<eval::RunCheckpoints> a(runs), b(runs);
        for (std::size_t n = 0; n < runs; ++n)
            for (int k = 0; k < len; ++k) {
                a[n].push_back(uniform_vector(d, rng, 20.0));
                b[n].push_back(uniform_vector(d, rng, 20.0));
            }
        double sum = 0.0;
        for (std::size_t n = 0; n < runs; ++n)
            for (int k = k0; k <= K; ++k)
                for (int i = 0; i < d; ++i) sum += std::pow(a[n][k][i] - b[n][k][i], 2);
        const double oracle = std::sqrt(sum / ((K - k0) * static_cast<double>(runs)));
        worst = std::max(worst, std::abs(eval::rmse(a, b, k0, K) - oracle) / oracle);
    }
    const double c = 1.7;
    std::vector<eval::RunCheckpoints> ref(3, eval::RunCheckpoints(101, Vector::Zero(3)));
    std::vector<eval::RunCheckpoints> off(3, eval::RunCheckpoints(101, Vector::Constant(3, c)));
    const double closed = c * std::sqrt(3.0 * 51.0 / 50.0);
    const double closed_err = std::abs(eval::rmse(off, ref, 50, 100) - closed) / closed;
    return {worst < 1e-12 && closed_err < 1e-12,
            "max relative deviation " + fmt(worst) + " (oracle), " + fmt(closed_err) + " (closed form)"};
}

Outcome bias_ordering() {
    dynamics::Rng rng(7);
    const auto data = dynamics::make_training_set(dynamics::OdeSpec{}, 1000, 0.01, rng,
                                                  {.burn_in = 0.0, .pairs_per_trajectory = 200});
    nn::ResNetSystem shape;
    shape.state_dim = 3;
    shape.stencils = nn::ResNetSystem::full_stencils(3);
    shape.nets.assign(3, nn::ResNetParams::zeros(3, 1, 6, 15));
    training::TrainConfig config;
    config.gamma = 1e4;
    config.max_iters = 300;
    config.seed = 8;
    const auto trained = training::train_system(shape, data, config);
    double worst = 0.0;
    for (const auto& net : trained.system.nets) worst = std::max(worst, training::max_bias_order_violation(net));
    return {worst < 1e-3, "max adjacent-bias violation " + fmt(worst)};
}

Outcome masking_stability() {
    std::mt19937_64 rng(8);
    std::bernoulli_distribution coin(0.5);
    int ok = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = 1 + trial % 6;
        nn::ResNetSystem sys;
        sys.state_dim = d;
        sys.stencils = nn::ResNetSystem::full_stencils(d);
        for (int i = 0; i < d; ++i) sys.nets.push_back(nn::ResNetParams::zeros(d, 1, 3 + trial % 4, 1 + trial % 8));
        std::vector<int> observed;
        for (int i = 0; i < d; ++i)
            if (coin(rng)) observed.push_back(i);
        const assimilation::StateSpaceMask mask(sys, assimilation::ObservationOperator(observed, d));
        const Vector x = uniform_vector(mask.size(), rng, 10.0);
        ok += mask.apply(x).norm() <= x.norm();
    }
    return {ok == 1000, std::to_string(ok) + "/1000 pairs satisfy |mask(x)| <= |x|"};
}

Outcome mu_decay() {
    double worst = 0.0;
    for (double lam : {0.2, 1.0, 3.0}) {
        const assimilation::NudgeSchedule s{37.5, lam, 10};
        const auto schedule = s.decay_schedule();
        for (int i = 0; i < 10; ++i) {
            const long double expected = 37.5L * std::exp(-static_cast<long double>(i) * static_cast<long double>(lam));
            const double rel = static_cast<double>(std::abs((schedule[static_cast<std::size_t>(i)] - expected) / expected));
            worst = std::max(worst, rel);
            worst = std::max(worst, static_cast<double>(std::abs((s.effective_mu(i) - expected) / expected)));
        }
    }
    return {worst < 1e-15, "max relative deviation " + fmt(worst)};
}

Outcome feedback_vanishing() {
    const auto& system = small_trained_system();
    const auto truth = short_truth(3, 61, 1.0);
    bool identical = true;
    for (const auto& op : {assimilation::ObservationOperator({0}, 3), assimilation::ObservationOperator::all(3)}) {
        for (std::size_t n = 0; n < truth.size(); ++n) {
            const auto stream = assimilation::make_stream(truth[n].checkpoints, op);
            const Vector w0 = eval::wrong_initial_condition(3, 10.0, 62, n);
            const auto free = assimilation::free_run(system, w0, 100);
            for (auto m : {assimilation::Method::Ninn1, assimilation::Method::Ninn2Plain,
                           assimilation::Method::Ninn2Lookahead}) {
                for (double lam : {0.0, 1.0}) {
                    const auto r = assimilation::run_assimilation(m, system, stream, op, {0.0, lam, 10}, w0);
                    if (r.estimates.size() != 101) identical = false;
                    for (std::size_t j = 0; identical && j <= 100; ++j)
                        identical = (r.estimates.states[j].array() == free[j].array()).all();
                }
            }
        }
    }
    return {identical, "100-step trajectories of 3 NINN methods compared bitwise against free runs"};
}

Outcome case2_optimality() {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0, 1);
    int wins = 0;
    double worst_norm = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 5, m = 1 + trial % 6;
        Matrix W(n, m);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < m; ++c) W(r, c) = g(rng);
        const Vector y = uniform_vector(m, rng, 2.0);
        const Vector q = uniform_vector(n, rng, trial % 2 ? 0.5 : 8.0);
        const Vector x = assimilation::case2_direction(W, y, q);
        worst_norm = std::max(worst_norm, x.norm());
        const double best = (W * (y + x) - q).squaredNorm();
        bool beats = true;
        for (int s = 0; s < 1000; ++s) {
            Vector v(m);
            for (int k = 0; k < m; ++k) v[k] = g(rng);
            v *= std::pow(u(rng), 1.0 / m) / v.norm();
            beats = beats && best <= (W * (y + v) - q).squaredNorm();
        }
        wins += beats;
    }
    return {wins == 100 && worst_norm <= 1 + 1e-10,
            std::to_string(wins) + "/100 instances beat all samples; max |x| = " + csv::format_double(worst_norm)};
}

Outcome determinism() {
    const std::string config = R"([run]
seed = 5
[system]
model = lorenz63
[data]
samples = 600
burn_in = 0
pairs_per_trajectory = 200
runs = 3
obs_start = 10
horizon = 15
observe = 1
[train]
data_dir = data
hidden_layers = 4
width = 8
max_iters = 80
[assimilate]
data_dir = data
model_dir = model
methods = all
mu = 2, 10
lambda_decay = 0.2, 3
[report]
results = assim
k0 = 10
)";
    std::vector<std::string> tables;
    for (int rep = 0; rep < 2; ++rep) {
        const fs::path dir = g_work / ("c12_" + std::to_string(rep));
        fs::remove_all(dir);
        fs::create_directories(dir);
        std::ofstream(dir / "exp.ini") << config;
        for (const auto& [cmd, out] : {std::pair{"gen-data", "data"}, {"train", "model"}, {"assimilate", "assim"},
                                       {"report", "report"}}) {
            const int code = cli::run_command(cmd, {dir / "exp.ini", dir / out, std::nullopt, rep + 1});
            if (code != 0) return {false, std::string(cmd) + " exited with " + std::to_string(code)};
        }
        std::ifstream in(dir / "report" / "rmse_table.csv", std::ios::binary);
        tables.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return {!tables[0].empty() && tables[0] == tables[1],
            "two pipelines (jobs 1 and 2) produced " + std::string(tables[0] == tables[1] ? "identical" : "different") +
                " rmse_table.csv (" + std::to_string(tables[0].size()) + " bytes)"};
}

std::set<int> parse_ids(const std::string& list) {
    std::set<int> out;
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.insert(std::stoi(item));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string only, expect_fail;
    std::string work = (fs::temp_directory_path() / "ninn_acceptance").string();
    std::string configs = NINN_CONFIG_DIR;
    app.add_option("--only", only, "Comma-separated criterion numbers");
    app.add_option("--expect-fail", expect_fail, "Criteria known to fail");
    app.add_option("--work-dir", work, "Scratch directory for pipeline runs");
    app.add_option("--config-dir", configs, "Directory holding the experiment configs");
    CLI11_PARSE(app, argc, argv);
    g_work = work;
    g_configs = configs;
    fs::create_directories(g_work);

    const std::vector<Criterion> criteria{
        {1, "gradient correctness", 30, gradient_correctness},
        {2, "RK4 convergence order", 5, rk4_order},
        {3, "classic nudging contraction", 10, nudging_contraction},
        {4, "Lorenz 63 method ordering", 1800, table_ordering},
        {5, "direct observation contract", 0, direct_observation_contract},
        {6, "RMSE oracle equivalence", 0, rmse_oracle},
        {7, "bias ordering", 0, bias_ordering},
        {8, "masking stability", 0, masking_stability},
        {9, "mu decay schedule", 0, mu_decay},
        {10, "feedback vanishing", 0, feedback_vanishing},
        {11, "case2 direction optimality", 0, case2_optimality},
        {12, "pipeline determinism", 0, determinism},
    };
    const auto selected = parse_ids(only);
    const auto expected = parse_ids(expect_fail);

    int status = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.contains(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.time_limit_s > 0 && secs >= c.time_limit_s) {
            o.pass = false;
            o.detail += "; runtime limit " + fmt(c.time_limit_s) + " s exceeded";
        }
        std::string tag = o.pass ? "PASS" : "FAIL";
        if (expected.contains(c.id)) {
            tag += o.pass ? " (unexpected pass)" : " (expected)";
            status += o.pass;
        } else {
            status += !o.pass;
        }
        std::printf("[%s] C%02d %s: %s [%.2f s]\n", tag.c_str(), c.id, c.name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return status;
}
