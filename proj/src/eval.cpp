// SPDX-License-Identifier: Apache-2.0

#include "sparsid/eval.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "sparsid/kernels.hpp"

namespace sparsid {

double rmse(const Vec& yhat, const Vec& y) {
    if (yhat.size() != y.size()) throw DataError("rmse: length mismatch");
    if (y.empty()) throw DataError("rmse: empty series");
    const double ss = kernels::active().sq_diff_sum(yhat.data(), y.data(), y.size());
    return std::sqrt(ss / double(y.size()));
}

EvalReport predict_one_step(const TrainedModel& model, const SignalPair& test) {
    RegressorDataset ds = build_regressors(test, model.n_a, model.n_b);
    const Vec truth = ds.targets;  // raw units
    Mat x = model.norm ? apply_norm(ds, *model.norm).rows : std::move(ds.rows);

    const ForwardTrace tr = forward(model.net, x);
    EvalReport rep;
    rep.mode = EvalMode::Prediction;
    rep.predictions = model.norm ? denorm_y(tr.yhat, *model.norm) : tr.yhat;
    rep.truth = truth;
    rep.first_index = std::size_t(std::max(model.n_a, model.n_b)) + 1;
    rep.rmse = rmse(rep.predictions, rep.truth);
    return rep;
}

namespace {

/// One normalized regressor row from raw u history and raw y estimates.
void fill_row(Mat& row, const SignalPair& sig, const Vec& y_est, std::size_t t, int n_a, int n_b,
              const std::optional<NormStats>& norm) {
    std::size_t c = 0;
    for (int k = 0; k <= n_a; ++k) {
        double v = sig.u[t - std::size_t(k)];
        if (norm) v = (v - norm->mean_u) / norm->std_u;
        row(0, c++) = v;
    }
    for (int k = 1; k <= n_b; ++k) {
        double v = y_est[t - std::size_t(k)];
        if (norm) v = (v - norm->mean_y) / norm->std_y;
        row(0, c++) = v;
    }
}

}  // namespace

EvalReport simulate_free_run(const TrainedModel& model, const SignalPair& test,
                             const Vec& y_seed) {
    const int n_a = model.n_a, n_b = model.n_b;
    const std::size_t t0 = std::size_t(std::max(n_a, n_b));
    const std::size_t len = test.length();
    if (len < t0 + 2) throw DataError("simulate_free_run: series shorter than lags");
    if (y_seed.size() != std::size_t(n_b) + 1) {
        throw DataError("simulate_free_run: need exactly " + std::to_string(n_b + 1) +
                        " seed outputs, got " + std::to_string(y_seed.size()));
    }

    Vec y_est(len, 0.0);
    for (std::size_t i = 0; i < y_seed.size(); ++i) {
        y_est[t0 - std::size_t(n_b) + i] = y_seed[i];
    }

    EvalReport rep;
    rep.mode = EvalMode::Simulation;
    rep.first_index = t0 + 1;

    Mat row(1, std::size_t(n_a + n_b + 1));
    for (std::size_t t = t0; t + 1 < len; ++t) {
        fill_row(row, test, y_est, t, n_a, n_b, model.norm);
        const ForwardTrace tr = forward(model.net, row);
        double pred = tr.yhat[0];
        if (model.norm) pred = denorm_y(pred, *model.norm);
        if (!std::isfinite(pred)) {
            rep.diverged = true;
            rep.diverged_step = t - t0;
            log_info("simulate_free_run: diverged at step " + std::to_string(rep.diverged_step));
            break;
        }
        y_est[t + 1] = pred;
        rep.predictions.push_back(pred);
        rep.truth.push_back(test.y[t + 1]);
    }
    if (rep.predictions.empty()) {
        rep.rmse = std::numeric_limits<double>::infinity();
    } else {
        rep.rmse = rmse(rep.predictions, rep.truth);
    }
    return rep;
}

EvalReport simulate_free_run(const TrainedModel& model, const SignalPair& test) {
    const std::size_t t0 = std::size_t(std::max(model.n_a, model.n_b));
    if (test.length() < t0 + 2) throw DataError("simulate_free_run: series shorter than lags");
    Vec seed(test.y.begin() + std::ptrdiff_t(t0) - model.n_b,
             test.y.begin() + std::ptrdiff_t(t0) + 1);
    return simulate_free_run(model, test, seed);
}

std::uint64_t sweep_cell_seed(std::uint64_t base_seed, double ratio_or_lambda, int repeat) {
    std::uint64_t h = fnv1a64(&ratio_or_lambda, sizeof ratio_or_lambda);
    h = fnv1a64(&repeat, sizeof repeat, h);
    return base_seed ^ splitmix64(h);
}

namespace {

bool same_cell_key(const SweepCell& a, const SweepCell& b) {
    return a.ratio == b.ratio && a.lambda == b.lambda && a.repeat == b.repeat;
}

void run_cells(std::vector<SweepCell>& cells, const std::function<void(SweepCell&)>& body,
               const SweepOptions& opt) {
    const int jobs = opt.jobs < 1 ? 1 : opt.jobs;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            SweepCell& cell = cells[i];
            bool reused = false;
            if (opt.completed) {
                for (const auto& done : *opt.completed) {
                    if (same_cell_key(done, cell)) {
                        cell = done;
                        reused = true;
                        break;
                    }
                }
            }
            if (!reused) {
                try {
                    body(cell);
                } catch (const std::exception& e) {
                    cell.failed = true;
                    cell.error = e.what();
                    cell.rmse = std::numeric_limits<double>::infinity();
                    log_error("sweep cell (ratio " + std::to_string(cell.ratio) + ", lambda " +
                              std::to_string(cell.lambda) + ", repeat " +
                              std::to_string(cell.repeat) + ") failed: " + cell.error);
                }
            }
            if (opt.on_cell) opt.on_cell(cell);
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
}

double evaluate_model(const TrainedModel& model, const SignalPair& test, EvalMode mode) {
    const EvalReport rep = mode == EvalMode::Prediction ? predict_one_step(model, test)
                                                        : simulate_free_run(model, test);
    return rep.diverged || !std::isfinite(rep.rmse) ? std::numeric_limits<double>::infinity()
                                                    : rep.rmse;
}

}  // namespace

std::vector<SweepCell> ratio_sweep(const TrainConfig& cfg, const RegressorDataset& train_raw,
                                   const SignalPair& test, const std::vector<double>& ratios,
                                   const SweepOptions& opt) {
    if (opt.repeats < 1) throw ConfigError("ratio_sweep: repeats must be >= 1");
    std::vector<SweepCell> cells;
    for (double r : ratios) {
        if (!(r > 0.0) || r > 1.0) throw ConfigError("ratio_sweep: ratio must be in (0, 1]");
        for (int k = 0; k < opt.repeats; ++k) {
            SweepCell c;
            c.ratio = r;
            c.lambda = cfg.lambda;
            c.repeat = k;
            c.seed = sweep_cell_seed(opt.base_seed, r, k);
            cells.push_back(c);
        }
    }
    run_cells(cells,
              [&](SweepCell& cell) {
                  TrainConfig cc = cfg;
                  cc.seed = cell.seed;
                  const RegressorDataset sub =
                      subset_ratio(train_raw, cell.ratio, opt.subset_mode, cell.seed);
                  const TrainedModel model = outer_train(cc, sub);
                  cell.rmse = evaluate_model(model, test, opt.mode);
                  cell.sparsity = sparsity(model.net);
              },
              opt);
    return cells;
}

std::vector<SweepCell> lambda_sweep(const TrainConfig& cfg, const RegressorDataset& train_raw,
                                    const SignalPair& test, const std::vector<double>& lambdas,
                                    const SweepOptions& opt) {
    if (opt.repeats < 1) throw ConfigError("lambda_sweep: repeats must be >= 1");
    std::vector<SweepCell> cells;
    for (double lam : lambdas) {
        if (lam < 0.0) throw ConfigError("lambda_sweep: lambda must be >= 0");
        for (int k = 0; k < opt.repeats; ++k) {
            SweepCell c;
            c.ratio = 1.0;
            c.lambda = lam;
            c.repeat = k;
            c.seed = sweep_cell_seed(opt.base_seed, lam, k);
            cells.push_back(c);
        }
    }
    run_cells(cells,
              [&](SweepCell& cell) {
                  TrainConfig cc = cfg;
                  cc.lambda = cell.lambda;
                  cc.seed = cell.seed;
                  const TrainedModel model = outer_train(cc, train_raw);
                  cell.rmse = evaluate_model(model, test, opt.mode);
                  cell.sparsity = sparsity(model.net);
              },
              opt);
    return cells;
}

namespace {

std::vector<SweepSummaryRow> summarize_by_key(const std::vector<SweepCell>& cells,
                                              double (*key_of)(const SweepCell&)) {
    std::vector<double> keys;
    for (const auto& c : cells) {
        if (std::find(keys.begin(), keys.end(), key_of(c)) == keys.end()) {
            keys.push_back(key_of(c));
        }
    }
    std::vector<SweepSummaryRow> rows;
    for (double key : keys) {
        SweepSummaryRow row;
        row.ratio = key;
        double sum = 0.0, sum2 = 0.0, best = std::numeric_limits<double>::infinity();
        double worst = 0.0;
        int n_finite = 0, n_div = 0;
        for (const auto& c : cells) {
            if (key_of(c) != key) continue;
            if (std::isfinite(c.rmse)) {
                sum += c.rmse;
                sum2 += c.rmse * c.rmse;
                best = std::min(best, c.rmse);
                worst = std::max(worst, c.rmse);
                ++n_finite;
            } else {
                ++n_div;
            }
        }
        row.best = best;
        row.n_diverged = n_div;
        if (n_finite > 0) {
            row.mean = sum / n_finite;
            row.stddev = std::sqrt(std::max(0.0, sum2 / n_finite - row.mean * row.mean));
            row.mean_capped = (sum + double(n_div) * worst) / double(n_finite + n_div);
        } else {
            row.mean = row.mean_capped = std::numeric_limits<double>::infinity();
            row.stddev = 0.0;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

std::vector<SweepSummaryRow> summarize_by_ratio(const std::vector<SweepCell>& cells) {
    return summarize_by_key(cells, [](const SweepCell& c) { return c.ratio; });
}

std::vector<SweepSummaryRow> summarize_by_lambda(const std::vector<SweepCell>& cells) {
    return summarize_by_key(cells, [](const SweepCell& c) { return c.lambda; });
}

// --- CSV ---------------------------------------------------------------------

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    return out;
}

}  // namespace

void write_predictions_csv(const std::string& path, const EvalReport& report) {
    auto out = open_out(path);
    out << "t,y_true,y_hat\n";
    char buf[96];
    for (std::size_t i = 0; i < report.predictions.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", report.first_index + i,
                      report.truth[i], report.predictions[i]);
        out << buf;
    }
}

void write_sweep_csv(const std::string& path, const std::vector<SweepCell>& cells,
                     bool lambda_column) {
    auto out = open_out(path);
    out << (lambda_column ? "lambda,repeat,rmse,sparsity,seed\n"
                          : "ratio,repeat,rmse,sparsity,seed\n");
    char buf[160];
    for (const auto& c : cells) {
        std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g,%llu\n",
                      lambda_column ? c.lambda : c.ratio, c.repeat, c.rmse, c.sparsity,
                      static_cast<unsigned long long>(c.seed));
        out << buf;
    }
}

void write_summary_csv(const std::string& path, const std::vector<SweepSummaryRow>& rows) {
    auto out = open_out(path);
    out << "ratio,best,mean,std,mean_capped,n_diverged\n";
    char buf[200];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.ratio, r.best,
                      r.mean, r.stddev, r.mean_capped, r.n_diverged);
        out << buf;
    }
}

void write_history_csv(const std::string& path, const std::vector<IterRecord>& history) {
    auto out = open_out(path);
    out << "iter,train_rmse,val_rmse,cost_total,sparsity,active_weights,pruned\n";
    char buf[200];
    for (const auto& h : history) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%zu,%zu\n", h.iter,
                      h.train_rmse, h.val_rmse, h.cost_total, h.sparsity, h.active_weights,
                      h.pruned_this_iter);
        out << buf;
    }
}

void write_hyperlog_csv(const std::string& path, const std::vector<LayerCostRecord>& log) {
    auto out = open_out(path);
    out << "iter,layer,cost_total,data_term,reg_term,logdet_upsilon,logdet_Hinv,active_weights\n";
    char buf[240];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%zu\n", r.iter,
                      r.layer, r.cost.total, r.cost.data_term, r.cost.reg_term,
                      r.cost.logdet_upsilon, r.cost.logdet_h_plus_inv, r.active_weights);
        out << buf;
    }
}

}  // namespace sparsid
