// SPDX-License-Identifier: Apache-2.0
//
// sparsid: identify nonlinear dynamics from u/y series with a sparse
// Bayesian-regularized NARX network.
//
// Subcommands: simulate-data, train, predict, simulate, sweep.
// Exit codes: 0 ok, 2 bad arguments/config, 3 data error, 4 numeric failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sparsid/eval.hpp"
#include "sparsid/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sparsid;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

std::string file_digest_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for digest: " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    char hex[24];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

std::vector<double> parse_double_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError(std::string("cannot parse ") + what + " entry '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError(std::string("empty ") + what + " list");
    return out;
}

std::vector<std::size_t> parse_width_list(const std::string& s) {
    std::vector<std::size_t> out;
    for (double v : parse_double_list(s, "widths")) {
        if (v < 1.0) throw ConfigError("widths must be >= 1");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw ConfigError("config key '" + key + "': cannot parse boolean '" + v + "'");
}

// --- config file ------------------------------------------------------------

void apply_config_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
    auto d = [&] { return std::stod(value); };
    auto i = [&] { return std::stoi(value); };
    try {
        if (key == "lambda") cfg.lambda = d();
        else if (key == "lambda_layers") cfg.lambda_layers = parse_double_list(value, key.c_str());
        else if (key == "granularity") cfg.granularity = granularity_from_name(value);
        else if (key == "block_rows") cfg.block_rows = static_cast<std::size_t>(i());
        else if (key == "block_cols") cfg.block_cols = static_cast<std::size_t>(i());
        else if (key == "kappa_upsilon") cfg.kappa_upsilon = d();
        else if (key == "kappa_w") cfg.kappa_w = d();
        else if (key == "prune_start_iter") cfg.prune_start_iter = i();
        else if (key == "upsilon_floor") cfg.upsilon_floor = d();
        else if (key == "t_max") cfg.t_max = i();
        else if (key == "inner_steps") cfg.inner_steps = i();
        else if (key == "step_size") cfg.step_size = d();
        else if (key == "batch_size") cfg.batch_size = static_cast<std::size_t>(i());
        else if (key == "sigma2") cfg.sigma2 = d();
        else if (key == "hidden_widths") cfg.hidden_widths = parse_width_list(value);
        else if (key == "activation") cfg.activation = activation_from_name(value);
        else if (key == "n_a") cfg.n_a = i();
        else if (key == "n_b") cfg.n_b = i();
        else if (key == "normalize") cfg.normalize = parse_bool(value, key);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "patience") cfg.patience = i();
        else if (key == "checkpoint_every") cfg.checkpoint_every = i();
        else throw ConfigError("unknown config key '" + key + "'");
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse value '" + value + "'");
    }
}

/// Flat "key = value" file; '#' starts a comment.
void apply_config_file(TrainConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = true;
            for (char c : line) blank = blank && std::isspace(static_cast<unsigned char>(c));
            if (blank) continue;
            throw ConfigError(path + ": line " + std::to_string(lineno) +
                              " is not 'key = value'");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        apply_config_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

json config_to_json(const TrainConfig& cfg) {
    json j;
    j["lambda"] = cfg.lambda;
    if (!cfg.lambda_layers.empty()) j["lambda_layers"] = cfg.lambda_layers;
    j["granularity"] = granularity_name(cfg.granularity);
    j["block_rows"] = cfg.block_rows;
    j["block_cols"] = cfg.block_cols;
    j["kappa_upsilon"] = cfg.kappa_upsilon;
    j["kappa_w"] = cfg.kappa_w;
    j["prune_start_iter"] = cfg.prune_start_iter;
    j["upsilon_floor"] = cfg.upsilon_floor;
    j["t_max"] = cfg.t_max;
    j["inner_steps"] = cfg.inner_steps;
    j["step_size"] = cfg.step_size;
    j["batch_size"] = cfg.batch_size;
    j["sigma2"] = cfg.sigma2;
    j["hidden_widths"] = cfg.hidden_widths;
    j["activation"] = activation_name(cfg.activation);
    j["n_a"] = cfg.n_a;
    j["n_b"] = cfg.n_b;
    j["normalize"] = cfg.normalize;
    j["seed"] = cfg.seed;
    j["patience"] = cfg.patience;
    j["checkpoint_every"] = cfg.checkpoint_every;
    return j;
}

// --- manifest ---------------------------------------------------------------

struct ManifestWriter {
    json j;
    std::string path;

    ManifestWriter(const std::string& out_path, const std::string& command) : path(out_path) {
        j["command"] = command;
        j["version"] = kVersion;
        j["started"] = now_iso8601();
        j["inputs"] = json::object();
        j["outputs"] = json::array();
    }
    void input(const std::string& label, const std::string& file) {
        const std::string digest = file_digest_hex(file);  // may throw; keep it out of the braces
        j["inputs"][label] = {{"path", file}, {"fnv1a64", digest}};
    }
    void output(const std::string& file) { j["outputs"].push_back(file); }
    void finish() {
        j["finished"] = now_iso8601();
        save_text_file_atomic(path, j.dump(1) + "\n");
    }
};

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

// --- shared train-config CLI plumbing ----------------------------------------

struct TrainCliOpts {
    std::string config_path;
    std::string preset;
    double lambda = 0.0;
    std::string granularity;
    std::string widths;
    std::string activation;
    int t_max = 0, inner_steps = 0, n_a = 0, n_b = 0, prune_start = 0, patience = 0,
        checkpoint_every = 0;
    std::size_t batch_size = 0;
    double step_size = 0.0, sigma2 = 0.0, kappa_upsilon = 0.0, kappa_w = 0.0;
    std::uint64_t seed = 1;
    bool no_normalize = false;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "flat key = value config file");
        cmd->add_option("--preset", preset,
                        "prediction (widths 100,100, lags 5) or simulation (widths 10,10,10, lags 19)")
            ->check(CLI::IsMember({"prediction", "simulation"}));
        cmd->add_option("--lambda", lambda, "regularization strength; 0 = plain SGD");
        cmd->add_option("--granularity", granularity, "shape|row|column");
        cmd->add_option("--widths", widths, "hidden widths, e.g. 100,100");
        cmd->add_option("--activation", activation, "sigmoid|tanh|relu");
        cmd->add_option("--t-max", t_max, "outer iterations");
        cmd->add_option("--inner-steps", inner_steps, "SGD steps per outer iteration");
        cmd->add_option("--step-size", step_size, "SGD step size");
        cmd->add_option("--batch-size", batch_size, "mini-batch size; 0 = full batch");
        cmd->add_option("--sigma2", sigma2, "fixed noise variance");
        cmd->add_option("--kappa-upsilon", kappa_upsilon, "pruning threshold on upsilon");
        cmd->add_option("--kappa-w", kappa_w, "pruning threshold on |W|");
        cmd->add_option("--prune-start", prune_start, "first outer iteration that prunes");
        cmd->add_option("--n-a", n_a, "input lags");
        cmd->add_option("--n-b", n_b, "output lags");
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("--patience", patience, "early-stop patience; 0 = off");
        cmd->add_option("--checkpoint-every", checkpoint_every, "checkpoint period; 0 = off");
        cmd->add_flag("--no-normalize", no_normalize, "train on raw units");
    }

    TrainConfig build(const CLI::App* cmd) const {
        TrainConfig cfg;
        if (!preset.empty()) {
            if (preset == "prediction") {
                cfg.hidden_widths = {100, 100};
                cfg.n_a = cfg.n_b = 5;
            } else {
                cfg.hidden_widths = {10, 10, 10};
                cfg.n_a = cfg.n_b = 19;
            }
        }
        if (!config_path.empty()) apply_config_file(cfg, config_path);
        auto given = [&](const char* name) { return cmd->count(name) > 0; };
        if (given("--lambda")) cfg.lambda = lambda;
        if (given("--granularity")) cfg.granularity = granularity_from_name(granularity);
        if (given("--widths")) cfg.hidden_widths = parse_width_list(widths);
        if (given("--activation")) cfg.activation = activation_from_name(activation);
        if (given("--t-max")) cfg.t_max = t_max;
        if (given("--inner-steps")) cfg.inner_steps = inner_steps;
        if (given("--step-size")) cfg.step_size = step_size;
        if (given("--batch-size")) cfg.batch_size = batch_size;
        if (given("--sigma2")) cfg.sigma2 = sigma2;
        if (given("--kappa-upsilon")) cfg.kappa_upsilon = kappa_upsilon;
        if (given("--kappa-w")) cfg.kappa_w = kappa_w;
        if (given("--prune-start")) cfg.prune_start_iter = prune_start;
        if (given("--n-a")) cfg.n_a = n_a;
        if (given("--n-b")) cfg.n_b = n_b;
        if (given("--seed")) cfg.seed = seed;
        if (given("--patience")) cfg.patience = patience;
        if (given("--checkpoint-every")) cfg.checkpoint_every = checkpoint_every;
        if (no_normalize) cfg.normalize = false;
        cfg.validate();
        return cfg;
    }
};

// --- subcommand handlers -------------------------------------------------

struct SimDataOpts {
    std::string out = "tank.csv";
    std::size_t steps = 1024;
    double dt = 1.0;
    double k1 = 0.30, k2 = 0.25, k3 = 0.20, k4 = 0.12;
    double x1_0 = 0.5, x2_0 = 0.5;
    double noise_w1 = 0.0, noise_w2 = 0.0, noise_e = 0.0;
    double overflow_cap = 0.0;  // 0 = none
    std::uint64_t seed = 1;
    std::string input_kind = "multisine";
    double u_min = 0.0, u_max = 4.0;
    std::size_t u_hold = 64;
};

int cmd_simulate_data(const SimDataOpts& o) {
    ManifestWriter manifest(o.out + ".manifest.json", "simulate-data");
    manifest.j["seed"] = o.seed;

    TankParams p;
    p.k1 = o.k1;
    p.k2 = o.k2;
    p.k3 = o.k3;
    p.k4 = o.k4;
    p.x1_0 = o.x1_0;
    p.x2_0 = o.x2_0;
    p.noise_std_w1 = o.noise_w1;
    p.noise_std_w2 = o.noise_w2;
    p.noise_std_e = o.noise_e;
    if (o.overflow_cap > 0.0) p.overflow_cap = o.overflow_cap;

    const Vec u = o.input_kind == "steps"
                      ? step_input(o.steps, o.u_hold, o.u_min, o.u_max, o.seed)
                      : multisine_input(o.steps, o.u_min, o.u_max);
    const TankTrace trace = simulate_tank(p, u, o.dt, o.seed);
    write_signal_csv(o.out, trace);
    std::printf("wrote %zu samples to %s\n", trace.signal.length(), o.out.c_str());

    manifest.output(o.out);
    manifest.j["digest"] = file_digest_hex(o.out);
    manifest.finish();
    return 0;
}

struct TrainOpts {
    std::string train_csv, val_csv, out_dir = ".", resume;
    double ratio = 1.0;
    std::string ratio_mode = "prefix";
    bool uncertainty = false;
};

void write_uncertainty_csv(const std::string& path, const TrainedModel& model,
                           const RegressorDataset& train_norm, double sigma2) {
    const ForwardTrace tr = forward(model.net, train_norm.rows);
    const CurvatureBundle curv =
        curvature(model.net, tr, train_norm.targets, sigma2, CurvMode::GaussNewtonDiag);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "layer,row,col,w,mu,sigma\n";
    char buf[160];
    for (std::size_t l = 0; l < model.net.depth(); ++l) {
        const auto& lay = model.net.layers[l];
        const PosteriorMoments pm = posterior_moments(
            curv.layers[l].grad_w, curv.layers[l].hdiag, model.hyper.upsilon[l], lay.w, lay.mask);
        for (std::size_t i = 0; i < lay.w.rows(); ++i) {
            for (std::size_t j = 0; j < lay.w.cols(); ++j) {
                if (!lay.mask[i * lay.w.cols() + j]) continue;
                std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.17g,%.17g,%.17g\n", l + 1, i, j,
                              lay.w(i, j), pm.mu(i, j), std::sqrt(pm.sigma_diag(i, j)));
                out << buf;
            }
        }
    }
}

int cmd_train(const TrainOpts& o, const TrainConfig& cfg) {
    fs::create_directories(o.out_dir);
    ManifestWriter manifest(join_path(o.out_dir, "manifest.json"), "train");
    manifest.j["seed"] = cfg.seed;
    manifest.j["config"] = config_to_json(cfg);
    manifest.j["ratio"] = o.ratio;
    manifest.input("train_csv", o.train_csv);

    const SignalPair train_sig = load_benchmark_csv(o.train_csv);
    RegressorDataset ds = build_regressors(train_sig, cfg.n_a, cfg.n_b);
    if (o.ratio < 1.0) {
        ds = subset_ratio(ds, o.ratio,
                          o.ratio_mode == "random" ? SubsetMode::Random : SubsetMode::Prefix,
                          cfg.seed);
    }

    std::optional<RegressorDataset> val;
    if (!o.val_csv.empty()) {
        manifest.input("val_csv", o.val_csv);
        val = build_regressors(load_benchmark_csv(o.val_csv), cfg.n_a, cfg.n_b);
    }

    CheckpointSink sink = [&](const Checkpoint& ck) {
        const std::string path =
            join_path(o.out_dir, "checkpoint_" + std::to_string(ck.next_iter - 1) + ".json");
        save_text_file_atomic(path, checkpoint_to_json(ck, cfg.n_a, cfg.n_b));
        log_info("checkpoint written: " + path);
    };

    std::optional<Checkpoint> resume;
    if (!o.resume.empty()) {
        manifest.input("resume", o.resume);
        resume = checkpoint_from_json(load_text_file(o.resume));
    }

    const TrainedModel model =
        outer_train(cfg, ds, val ? &*val : nullptr, sink, resume ? &*resume : nullptr);

    const std::string model_path = join_path(o.out_dir, "model.json");
    save_text_file_atomic(model_path, model_to_json(model));
    write_history_csv(join_path(o.out_dir, "history.csv"), model.history);
    manifest.output(model_path);
    manifest.output(join_path(o.out_dir, "history.csv"));
    if (!model.cost_log.empty()) {
        write_hyperlog_csv(join_path(o.out_dir, "hyperlog.csv"), model.cost_log);
        manifest.output(join_path(o.out_dir, "hyperlog.csv"));
    }
    if (o.uncertainty) {
        RegressorDataset ds_n = model.norm ? apply_norm(ds, *model.norm) : ds;
        const std::string upath = join_path(o.out_dir, "uncertainty.csv");
        write_uncertainty_csv(upath, model, ds_n, cfg.sigma2);
        manifest.output(upath);
    }
    manifest.finish();

    const IterRecord last = model.history.empty() ? IterRecord{} : model.history.back();
    std::printf(
        "trained %d iterations: train_rmse %.6g, sparsity %.2f%% (%zu active weights, "
        "%.1f%% of hidden neurons connected)\n",
        last.iter, last.train_rmse, 100.0 * last.sparsity, last.active_weights,
        100.0 * neuron_sparsity(model.net));
    return 0;
}

struct EvalOpts {
    std::string model_path, test_csv, out_dir = ".";
};

int cmd_eval(const EvalOpts& o, EvalMode mode) {
    fs::create_directories(o.out_dir);
    const char* name = mode == EvalMode::Prediction ? "predict" : "simulate";
    ManifestWriter manifest(join_path(o.out_dir, "manifest.json"), name);
    manifest.input("model", o.model_path);
    manifest.input("test_csv", o.test_csv);

    const TrainedModel model = load_model_file(o.model_path);
    const SignalPair test = load_benchmark_csv(o.test_csv);
    const EvalReport rep = mode == EvalMode::Prediction ? predict_one_step(model, test)
                                                        : simulate_free_run(model, test);

    const std::string pred_path = join_path(o.out_dir, "predictions.csv");
    write_predictions_csv(pred_path, rep);
    json report;
    report["mode"] = mode == EvalMode::Prediction ? "prediction" : "simulation";
    report["rmse"] = rep.rmse;
    report["samples"] = rep.predictions.size();
    report["diverged"] = rep.diverged;
    if (rep.diverged) report["diverged_step"] = rep.diverged_step;
    const std::string report_path = join_path(o.out_dir, "report.json");
    save_text_file_atomic(report_path, report.dump(1) + "\n");
    manifest.output(pred_path);
    manifest.output(report_path);
    manifest.finish();

    std::printf("%s rmse: %.6g over %zu samples%s\n", name, rep.rmse, rep.predictions.size(),
                rep.diverged ? " (diverged)" : "");
    return 0;
}

struct SweepOpts {
    std::string train_csv, test_csv, out_dir = ".";
    std::string ratios, lambdas;
    int repeats = 1;
    int jobs = 1;
    std::string mode = "prediction";
    std::string ratio_mode = "prefix";
};

int cmd_sweep(const SweepOpts& o, const TrainConfig& cfg) {
    if (!o.ratios.empty() && !o.lambdas.empty()) {
        throw ConfigError("choose either --ratios or --lambdas, not both");
    }
    fs::create_directories(o.out_dir);
    const std::string cells_dir = join_path(o.out_dir, "cells");
    fs::create_directories(cells_dir);

    ManifestWriter manifest(join_path(o.out_dir, "manifest.json"), "sweep");
    manifest.j["seed"] = cfg.seed;
    manifest.j["config"] = config_to_json(cfg);
    manifest.input("train_csv", o.train_csv);
    manifest.input("test_csv", o.test_csv);

    const SignalPair train_sig = load_benchmark_csv(o.train_csv);
    const SignalPair test_sig = load_benchmark_csv(o.test_csv);
    const RegressorDataset ds = build_regressors(train_sig, cfg.n_a, cfg.n_b);

    // completed cells from an earlier interrupted run
    std::vector<SweepCell> done;
    for (const auto& entry : fs::directory_iterator(cells_dir)) {
        if (entry.path().extension() != ".json") continue;
        try {
            const json j = json::parse(load_text_file(entry.path().string()));
            SweepCell c;
            c.ratio = j.at("ratio").get<double>();
            c.lambda = j.at("lambda").get<double>();
            c.repeat = j.at("repeat").get<int>();
            c.rmse = j.at("rmse").is_null() ? std::numeric_limits<double>::infinity()
                                            : j.at("rmse").get<double>();
            c.sparsity = j.at("sparsity").get<double>();
            c.seed = j.at("seed").get<std::uint64_t>();
            c.failed = j.at("failed").get<bool>();
            done.push_back(c);
        } catch (const std::exception& e) {
            log_error("skipping unreadable cell file " + entry.path().string() + ": " + e.what());
        }
    }
    if (!done.empty()) log_info(std::to_string(done.size()) + " completed cells found");

    std::mutex cell_mutex;
    SweepOptions opt;
    opt.repeats = o.repeats;
    opt.base_seed = cfg.seed;
    opt.mode = o.mode == "simulation" ? EvalMode::Simulation : EvalMode::Prediction;
    opt.jobs = o.jobs;
    opt.subset_mode = o.ratio_mode == "random" ? SubsetMode::Random : SubsetMode::Prefix;
    opt.completed = &done;
    opt.on_cell = [&](const SweepCell& c) {
        std::lock_guard<std::mutex> lock(cell_mutex);
        json j;
        j["ratio"] = c.ratio;
        j["lambda"] = c.lambda;
        j["repeat"] = c.repeat;
        if (std::isfinite(c.rmse)) j["rmse"] = c.rmse;
        else j["rmse"] = nullptr;
        j["sparsity"] = c.sparsity;
        j["seed"] = c.seed;
        j["failed"] = c.failed;
        if (c.failed) j["error"] = c.error;
        char name[64];
        std::snprintf(name, sizeof name, "cell_%016llx.json",
                      static_cast<unsigned long long>(c.seed));
        save_text_file_atomic(join_path(cells_dir, name), j.dump(1) + "\n");
    };

    const bool lambda_mode = !o.lambdas.empty();
    std::vector<SweepCell> cells;
    if (lambda_mode) {
        cells = lambda_sweep(cfg, ds, test_sig, parse_double_list(o.lambdas, "lambdas"), opt);
    } else {
        const std::vector<double> ratios =
            o.ratios.empty()
                ? std::vector<double>{0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}
                : parse_double_list(o.ratios, "ratios");
        cells = ratio_sweep(cfg, ds, test_sig, ratios, opt);
    }

    const std::string sweep_path = join_path(o.out_dir, "sweep.csv");
    const std::string summary_path = join_path(o.out_dir, "summary.csv");
    write_sweep_csv(sweep_path, cells, lambda_mode);
    write_summary_csv(summary_path,
                      lambda_mode ? summarize_by_lambda(cells) : summarize_by_ratio(cells));
    manifest.output(sweep_path);
    manifest.output(summary_path);
    manifest.finish();

    std::printf("sweep finished: %zu cells -> %s\n", cells.size(), summary_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse Bayesian NARX identification"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    SimDataOpts sim;
    CLI::App* c_sim = app.add_subcommand("simulate-data", "synthesize a cascaded-tanks dataset");
    c_sim->add_option("--out", sim.out, "output CSV (t,u,y,x1,x2)");
    c_sim->add_option("--steps", sim.steps, "number of samples");
    c_sim->add_option("--dt", sim.dt, "integration step, seconds");
    c_sim->add_option("--k1", sim.k1);
    c_sim->add_option("--k2", sim.k2);
    c_sim->add_option("--k3", sim.k3);
    c_sim->add_option("--k4", sim.k4);
    c_sim->add_option("--x1-0", sim.x1_0, "initial level, tank 1");
    c_sim->add_option("--x2-0", sim.x2_0, "initial level, tank 2");
    c_sim->add_option("--noise-w1", sim.noise_w1, "process noise std, tank 1");
    c_sim->add_option("--noise-w2", sim.noise_w2, "process noise std, tank 2");
    c_sim->add_option("--noise-e", sim.noise_e, "measurement noise std");
    c_sim->add_option("--overflow-cap", sim.overflow_cap, "level cap; 0 = none");
    c_sim->add_option("--seed", sim.seed);
    c_sim->add_option("--input", sim.input_kind, "multisine|steps")
        ->check(CLI::IsMember({"multisine", "steps"}));
    c_sim->add_option("--u-min", sim.u_min);
    c_sim->add_option("--u-max", sim.u_max);
    c_sim->add_option("--u-hold", sim.u_hold, "hold length for steps input");

    TrainOpts train_o;
    TrainCliOpts train_cfg;
    CLI::App* c_train = app.add_subcommand("train", "train a model");
    c_train->add_option("--train-csv", train_o.train_csv, "training series")->required();
    c_train->add_option("--val-csv", train_o.val_csv, "validation series");
    c_train->add_option("--out-dir", train_o.out_dir);
    c_train->add_option("--ratio", train_o.ratio, "training-data ratio in (0, 1]");
    c_train->add_option("--ratio-mode", train_o.ratio_mode, "prefix|random")
        ->check(CLI::IsMember({"prefix", "random"}));
    c_train->add_option("--resume", train_o.resume, "checkpoint to continue from");
    c_train->add_flag("--uncertainty", train_o.uncertainty,
                      "write posterior weight uncertainty CSV");
    train_cfg.add_flags(c_train);

    EvalOpts pred_o;
    CLI::App* c_pred = app.add_subcommand("predict", "one-step-ahead prediction on a test series");
    c_pred->add_option("--model", pred_o.model_path, "model or checkpoint JSON")->required();
    c_pred->add_option("--test-csv", pred_o.test_csv)->required();
    c_pred->add_option("--out-dir", pred_o.out_dir);

    EvalOpts simr_o;
    CLI::App* c_simr = app.add_subcommand("simulate", "free-run simulation on a test series");
    c_simr->add_option("--model", simr_o.model_path, "model or checkpoint JSON")->required();
    c_simr->add_option("--test-csv", simr_o.test_csv)->required();
    c_simr->add_option("--out-dir", simr_o.out_dir);

    SweepOpts sweep_o;
    TrainCliOpts sweep_cfg;
    CLI::App* c_sweep = app.add_subcommand("sweep", "data-ratio or lambda sweep with repeats");
    c_sweep->add_option("--train-csv", sweep_o.train_csv)->required();
    c_sweep->add_option("--test-csv", sweep_o.test_csv)->required();
    c_sweep->add_option("--out-dir", sweep_o.out_dir);
    c_sweep->add_option("--ratios", sweep_o.ratios, "comma list; default 5%..100% grid");
    c_sweep->add_option("--lambdas", sweep_o.lambdas, "comma list; switches to a lambda sweep");
    c_sweep->add_option("--repeats", sweep_o.repeats);
    c_sweep->add_option("--jobs", sweep_o.jobs, "parallel cells");
    c_sweep->add_option("--mode", sweep_o.mode, "prediction|simulation")
        ->check(CLI::IsMember({"prediction", "simulation"}));
    c_sweep->add_option("--ratio-mode", sweep_o.ratio_mode, "prefix|random")
        ->check(CLI::IsMember({"prefix", "random"}));
    sweep_cfg.add_flags(c_sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (c_sim->parsed()) return cmd_simulate_data(sim);
        if (c_train->parsed()) {
            if (!(train_o.ratio > 0.0) || train_o.ratio > 1.0) {
                throw ConfigError("--ratio must be in (0, 1]");
            }
            return cmd_train(train_o, train_cfg.build(c_train));
        }
        if (c_pred->parsed()) return cmd_eval(pred_o, EvalMode::Prediction);
        if (c_simr->parsed()) return cmd_eval(simr_o, EvalMode::Simulation);
        if (c_sweep->parsed()) return cmd_sweep(sweep_o, sweep_cfg.build(c_sweep));
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
