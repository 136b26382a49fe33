// SPDX-License-Identifier: Apache-2.0
//
// Training loop: inner proximal SGD on the reweighted problem, one hyper
// refresh per outer iteration, then dual-threshold pruning.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sparsid/narx_data.hpp"
#include "sparsid/sparse_bayes.hpp"

namespace sparsid {

struct TrainConfig {
    // regularization; lambda = 0 turns the whole Bayesian machinery off and
    // leaves plain SGD (the unregularized baseline)
    double lambda = 0.0;
    std::vector<double> lambda_layers;  // optional per-layer override
    Granularity granularity = Granularity::Row;
    std::size_t block_rows = 1, block_cols = 1;

    // pruning thresholds kappa_upsilon / kappa_w and warm-up
    double kappa_upsilon = 1e-8;
    double kappa_w = 1e-6;
    int prune_start_iter = 3;
    double upsilon_floor = 1e-10;

    // optimization
    int t_max = 50;
    int inner_steps = 200;
    double step_size = 0.02;
    std::size_t batch_size = 64;  // 0 = full batch
    double sigma2 = 1.0;

    // architecture / data
    std::vector<std::size_t> hidden_widths = {20, 20};
    Activation activation = Activation::Tanh;
    int n_a = 5, n_b = 5;
    bool normalize = true;

    std::uint64_t seed = 1;
    int patience = 0;          // early stop on validation RMSE; 0 = off
    int checkpoint_every = 0;  // iterations; 0 = off

    double lambda_for_layer(std::size_t l) const {
        return l < lambda_layers.size() ? lambda_layers[l] : lambda;
    }
    bool regularized() const;
    void validate() const;
};

struct IterRecord {
    int iter = 0;
    double train_rmse = 0.0;  // raw units
    double val_rmse = std::numeric_limits<double>::quiet_NaN();
    double cost_total = 0.0;  // summed marginal cost over layers
    double sparsity = 1.0;    // active / initial weights
    std::size_t active_weights = 0;
    std::size_t pruned_this_iter = 0;
};

/// Per-layer cost diagnostics for one outer iteration (hyper log CSV).
struct LayerCostRecord {
    int iter = 0;
    int layer = 0;
    CostReport cost;
    std::size_t active_weights = 0;
};

struct TrainedModel {
    Network net;
    HyperState hyper;
    std::vector<IterRecord> history;
    std::vector<LayerCostRecord> cost_log;
    std::optional<NormStats> norm;
    int n_a = 5, n_b = 5;
};

/// Resumable snapshot taken after an outer iteration completes.
struct Checkpoint {
    int next_iter = 1;  // 1-based outer iteration to run next
    Network net;
    HyperState hyper;
    std::string batch_rng_state;
    std::vector<IterRecord> history;
    std::vector<LayerCostRecord> cost_log;
    std::optional<NormStats> norm;
};

using CheckpointSink = std::function<void(const Checkpoint&)>;

/// Runs `cfg.inner_steps` mini-batch proximal SGD steps in place:
/// plain gradient steps on E, then per weight
///   W <- sign(W) * max(|W| - step * lambda * omega, 0)
/// when regularization is on. Biases take plain gradient steps; masked
/// entries stay 0. Aborts with the step index on a non-finite loss.
void inner_optimize(Network& net, const HyperState& hyper, const RegressorDataset& ds,
                    const TrainConfig& cfg, RngStream& batch_rng);

/// Full outer loop on raw-unit datasets (normalization handled inside when
/// cfg.normalize). ds_val is optional; resume_from continues a checkpoint.
TrainedModel outer_train(const TrainConfig& cfg, const RegressorDataset& ds_train,
                         const RegressorDataset* ds_val = nullptr,
                         const CheckpointSink& sink = nullptr,
                         const Checkpoint* resume_from = nullptr);

/// Masks entries with upsilon < kappa_upsilon or |W| < kappa_w, zeroing W and
/// the hyper entries. Permanent. Throws NumericError if a layer would lose
/// its last active weight.
std::size_t prune(Network& net, HyperState& hyper, double kappa_upsilon, double kappa_w);

/// Active / initial weight count, in [0, 1].
double sparsity(const Network& net);

/// Fraction of hidden neurons still having at least one active incoming and
/// one active outgoing weight.
double neuron_sparsity(const Network& net);

}  // namespace sparsid
