// SPDX-License-Identifier: Apache-2.0
//
// Scoring: one-step-ahead prediction, free-run simulation, ratio and lambda
// sweeps, and the CSV reports they emit.

#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sparsid/trainer.hpp"

namespace sparsid {

enum class EvalMode { Prediction, Simulation };

struct EvalReport {
    double rmse = std::numeric_limits<double>::quiet_NaN();
    Vec predictions;  // raw units
    Vec truth;        // raw units
    std::size_t first_index = 0;  // time index of predictions[0] in the source series
    EvalMode mode = EvalMode::Prediction;
    bool diverged = false;
    std::size_t diverged_step = 0;
};

/// Root mean square error; errors on empty or mismatched lengths.
double rmse(const Vec& yhat, const Vec& y);

/// Feeds the true lagged u, y at every step and scores yhat(t+1) against
/// y(t+1) on raw units.
EvalReport predict_one_step(const TrainedModel& model, const SignalPair& test);

/// Free run: u comes from data, the y lags are filled from the model's own
/// earlier predictions. The lag window is seeded with the first n_b + 1 true
/// outputs (the chain structurally needs one more value than n_b because
/// z(t) starts at y(t-1) while step t produces yhat(t+1)). A non-finite
/// prediction stops the run; the partial report is flagged diverged.
EvalReport simulate_free_run(const TrainedModel& model, const SignalPair& test);

/// Explicit-seed variant: y_seed must hold exactly n_b + 1 values, the true
/// outputs at indices max(n_a, n_b) - n_b ... max(n_a, n_b).
EvalReport simulate_free_run(const TrainedModel& model, const SignalPair& test,
                             const Vec& y_seed);

struct SweepCell {
    double ratio = 1.0;
    double lambda = 0.0;
    int repeat = 0;
    double rmse = std::numeric_limits<double>::infinity();
    double sparsity = 1.0;
    std::uint64_t seed = 0;
    bool failed = false;      // exception during train/eval
    std::string error;
};

struct SweepSummaryRow {
    double ratio = 1.0;
    double best = 0.0;
    double mean = 0.0;    // over finite cells
    double stddev = 0.0;  // over finite cells
    double mean_capped = 0.0;  // diverged cells counted at the worst finite rmse
    int n_diverged = 0;
};

struct SweepOptions {
    int repeats = 1;
    std::uint64_t base_seed = 1;
    EvalMode mode = EvalMode::Prediction;
    int jobs = 1;
    SubsetMode subset_mode = SubsetMode::Prefix;
    /// Cells already computed (matched on ratio, lambda, repeat) are copied
    /// instead of re-run, so an interrupted sweep resumes where it stopped.
    const std::vector<SweepCell>* completed = nullptr;
    /// Called as each cell finishes (from the computing thread).
    std::function<void(const SweepCell&)> on_cell;
};

/// Per (ratio, repeat): train on the subset, evaluate on the full test set.
/// Cell seed = base_seed ^ splitmix(hash(ratio, repeat)) so any cell can be
/// reproduced alone. Failed cells are recorded and the sweep continues.
/// jobs > 1 fans cells over threads; results are identical to jobs = 1.
std::vector<SweepCell> ratio_sweep(const TrainConfig& cfg, const RegressorDataset& train_raw,
                                   const SignalPair& test, const std::vector<double>& ratios,
                                   const SweepOptions& opt);

/// Logarithmic (or explicit) lambda grid; one cell per (lambda, repeat),
/// trained on the full training set.
std::vector<SweepCell> lambda_sweep(const TrainConfig& cfg, const RegressorDataset& train_raw,
                                    const SignalPair& test, const std::vector<double>& lambdas,
                                    const SweepOptions& opt);

std::vector<SweepSummaryRow> summarize_by_ratio(const std::vector<SweepCell>& cells);

/// Same statistics grouped by lambda; the key lands in the `ratio` field.
std::vector<SweepSummaryRow> summarize_by_lambda(const std::vector<SweepCell>& cells);

std::uint64_t sweep_cell_seed(std::uint64_t base_seed, double ratio_or_lambda, int repeat);

// --- CSV emission ------------------------------------------------------------

/// predictions.csv: t,y_true,y_hat
void write_predictions_csv(const std::string& path, const EvalReport& report);
/// sweep.csv: ratio,repeat,rmse,sparsity,seed  (lambda sweeps add a lambda column)
void write_sweep_csv(const std::string& path, const std::vector<SweepCell>& cells,
                     bool lambda_column);
/// summary.csv: ratio,best,mean,std,mean_capped,n_diverged
void write_summary_csv(const std::string& path, const std::vector<SweepSummaryRow>& rows);
/// history.csv: iter,train_rmse,val_rmse,cost_total,sparsity,active_weights,pruned
void write_history_csv(const std::string& path, const std::vector<IterRecord>& history);
/// hyperlog.csv: iter,layer,cost_total,data_term,reg_term,logdet_upsilon,logdet_Hinv,active_weights
void write_hyperlog_csv(const std::string& path, const std::vector<LayerCostRecord>& log);

}  // namespace sparsid
