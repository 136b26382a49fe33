// SPDX-License-Identifier: Apache-2.0

#include "sparsid/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sparsid/kernels.hpp"

namespace sparsid {

bool TrainConfig::regularized() const {
    if (lambda > 0.0) return true;
    return std::any_of(lambda_layers.begin(), lambda_layers.end(),
                       [](double l) { return l > 0.0; });
}

void TrainConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw ConfigError(std::string("config: ") + name + " must be > 0");
    };
    if (lambda < 0.0) throw ConfigError("config: lambda must be >= 0");
    for (double l : lambda_layers) {
        if (l < 0.0) throw ConfigError("config: lambda_layers entries must be >= 0");
    }
    positive(kappa_upsilon, "kappa_upsilon");
    positive(kappa_w, "kappa_w");
    positive(step_size, "step_size");
    positive(sigma2, "sigma2");
    positive(upsilon_floor, "upsilon_floor");
    if (t_max < 0) throw ConfigError("config: t_max must be >= 0");
    if (inner_steps < 0) throw ConfigError("config: inner_steps must be >= 0");
    if (prune_start_iter < 0) throw ConfigError("config: prune_start_iter must be >= 0");
    if (regularized() && t_max > 0 && prune_start_iter > t_max) {
        throw ConfigError("config: prune_start_iter must be <= t_max");
    }
    if (n_a < 0 || n_b < 0) throw ConfigError("config: lags must be >= 0");
    if (hidden_widths.empty()) throw ConfigError("config: hidden_widths must not be empty");
    for (auto w : hidden_widths) {
        if (w == 0) throw ConfigError("config: hidden width 0");
    }
    if (patience < 0) throw ConfigError("config: patience must be >= 0");
    if (checkpoint_every < 0) throw ConfigError("config: checkpoint_every must be >= 0");
}

void inner_optimize(Network& net, const HyperState& hyper, const RegressorDataset& ds,
                    const TrainConfig& cfg, RngStream& batch_rng) {
    if (ds.size() == 0) throw DataError("inner_optimize: empty dataset");
    const auto& K = kernels::active();
    const std::size_t n_samples = ds.size();
    const std::size_t bs =
        cfg.batch_size == 0 ? n_samples : std::min(cfg.batch_size, n_samples);
    const bool full_batch = bs == n_samples;
    const bool reg = cfg.regularized();

    // per-layer soft-threshold amounts; omega is fixed during the inner solve
    std::vector<Mat> thresh;
    if (reg) {
        for (std::size_t l = 0; l < net.depth(); ++l) {
            Mat t = hyper.omega[l];
            K.scal(cfg.step_size * cfg.lambda_for_layer(l), t.data(), t.size());
            thresh.push_back(std::move(t));
        }
    }

    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    Mat zb;
    Vec yb;

    for (int step = 0; step < cfg.inner_steps; ++step) {
        const Mat* z = &ds.rows;
        const Vec* y = &ds.targets;
        if (!full_batch) {
            if (cursor + bs > order.size()) {
                order.resize(n_samples);
                std::iota(order.begin(), order.end(), std::size_t{0});
                batch_rng.shuffle(order);
                cursor = 0;
            }
            zb = Mat(bs, ds.width());
            yb.resize(bs);
            for (std::size_t i = 0; i < bs; ++i) {
                const std::size_t r = order[cursor + i];
                std::copy(ds.rows.row(r), ds.rows.row(r) + ds.width(), zb.row(i));
                yb[i] = ds.targets[r];
            }
            cursor += bs;
            z = &zb;
            y = &yb;
        }

        const ForwardTrace trace = forward(net, *z);
        const CurvatureBundle g = backward(net, trace, *y, cfg.sigma2);
        if (!std::isfinite(g.loss)) {
            throw NumericError("inner_optimize: non-finite loss at step " + std::to_string(step) +
                               " (step_size too large?)");
        }

        for (std::size_t l = 0; l < net.depth(); ++l) {
            LayerParams& lay = net.layers[l];
            K.axpy(-cfg.step_size, g.layers[l].grad_w.data(), lay.w.data(), lay.w.size());
            K.axpy(-cfg.step_size, g.layers[l].grad_b.data(), lay.b.data(), lay.b.size());
            if (reg && cfg.lambda_for_layer(l) > 0.0) {
                K.soft_threshold(lay.w.data(), thresh[l].data(), lay.w.size());
            }
        }
    }
}

std::size_t prune(Network& net, HyperState& hyper, double kappa_upsilon, double kappa_w) {
    if (!(kappa_upsilon > 0.0) || !(kappa_w > 0.0)) {
        throw ConfigError("prune: thresholds must be positive");
    }
    std::size_t removed = 0;
    for (std::size_t l = 0; l < net.depth(); ++l) {
        LayerParams& lay = net.layers[l];
        // decide first so a fully-pruned layer fails before any mutation
        std::vector<std::size_t> hits;
        std::size_t survivors = 0;
        for (std::size_t k = 0; k < lay.w.size(); ++k) {
            if (!lay.mask[k]) continue;
            if (hyper.upsilon[l][k] < kappa_upsilon || std::fabs(lay.w[k]) < kappa_w) {
                hits.push_back(k);
            } else {
                ++survivors;
            }
        }
        if (survivors == 0 && !hits.empty()) {
            throw NumericError("prune: layer " + std::to_string(l + 1) +
                               " disconnected (all weights below thresholds)");
        }
        for (std::size_t k : hits) {
            lay.mask[k] = 0;
            lay.w[k] = 0.0;
            hyper.upsilon[l][k] = 0.0;
            hyper.alpha[l][k] = 0.0;
            hyper.omega[l][k] = 0.0;
        }
        removed += hits.size();
    }
    return removed;
}

double sparsity(const Network& net) {
    const std::size_t total = net.weight_count();
    return total == 0 ? 0.0 : double(net.active_weight_count()) / double(total);
}

double neuron_sparsity(const Network& net) {
    if (net.depth() < 2) return 1.0;
    std::size_t alive = 0, total = 0;
    for (std::size_t l = 0; l + 1 < net.depth(); ++l) {
        const LayerParams& in = net.layers[l];
        const LayerParams& out = net.layers[l + 1];
        for (std::size_t j = 0; j < in.out_width(); ++j) {
            ++total;
            bool has_in = false, has_out = false;
            for (std::size_t i = 0; i < in.in_width() && !has_in; ++i) {
                has_in = in.mask[i * in.out_width() + j] != 0;
            }
            for (std::size_t o = 0; o < out.out_width() && !has_out; ++o) {
                has_out = out.mask[j * out.out_width() + o] != 0;
            }
            if (has_in && has_out) ++alive;
        }
    }
    return total == 0 ? 1.0 : double(alive) / double(total);
}

namespace {

double dataset_rmse(const Network& net, const RegressorDataset& ds,
                    const std::optional<NormStats>& norm) {
    const ForwardTrace tr = forward(net, ds.rows);
    const double ss =
        kernels::active().sq_diff_sum(tr.yhat.data(), ds.targets.data(), ds.targets.size());
    const double r = std::sqrt(ss / double(ds.targets.size()));
    // both yhat and targets live in the normalized domain; scale back
    return norm ? r * norm->std_y : r;
}

}  // namespace

TrainedModel outer_train(const TrainConfig& cfg, const RegressorDataset& ds_train,
                         const RegressorDataset* ds_val, const CheckpointSink& sink,
                         const Checkpoint* resume_from) {
    cfg.validate();
    if (ds_train.size() == 0) throw DataError("outer_train: empty training set");

    std::optional<NormStats> norm;
    RegressorDataset train = ds_train;
    RegressorDataset val;
    const bool has_val = ds_val != nullptr;
    if (cfg.normalize) {
        auto [nds, st] = normalize(ds_train);
        train = std::move(nds);
        norm = st;
        if (has_val) val = apply_norm(*ds_val, st);
    } else if (has_val) {
        val = *ds_val;
    }

    Network net;
    HyperState hyper;
    RngStream batch_rng(cfg.seed, "batch");
    std::vector<IterRecord> history;
    std::vector<LayerCostRecord> cost_log;
    int start_iter = 1;

    if (resume_from) {
        net = resume_from->net;
        hyper = resume_from->hyper;
        batch_rng.load_state(resume_from->batch_rng_state);
        history = resume_from->history;
        cost_log = resume_from->cost_log;
        norm = resume_from->norm;
        start_iter = resume_from->next_iter;
    } else {
        std::vector<std::size_t> widths;
        widths.push_back(train.width());
        widths.insert(widths.end(), cfg.hidden_widths.begin(), cfg.hidden_widths.end());
        widths.push_back(1);
        net = Network::init(widths, cfg.activation, cfg.seed);
        hyper = HyperState::init(net, cfg.granularity, cfg.block_rows, cfg.block_cols,
                                 cfg.upsilon_floor);
    }
    if (net.input_width() != train.width()) {
        throw ConfigError("outer_train: network input width " +
                          std::to_string(net.input_width()) + " != regressor width " +
                          std::to_string(train.width()));
    }

    const bool reg = cfg.regularized();
    double best_watch = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int t = start_iter; t <= cfg.t_max; ++t) {
        inner_optimize(net, hyper, train, cfg, batch_rng);

        std::size_t removed = 0;
        double cost_total = std::numeric_limits<double>::quiet_NaN();
        if (reg) {
            const ForwardTrace tr = forward(net, train.rows);
            const CurvatureBundle curv =
                curvature(net, tr, train.targets, cfg.sigma2, CurvMode::GaussNewtonDiag);
            refresh_hyper(hyper, net, curv);

            cost_total = 0.0;
            for (std::size_t l = 0; l < net.depth(); ++l) {
                LayerCostRecord rec;
                rec.iter = t;
                rec.layer = int(l + 1);
                rec.cost = marginal_cost(net.layers[l].w, net.layers[l].w,
                                         curv.layers[l].grad_w, curv.layers[l].hdiag,
                                         hyper.upsilon[l], net.layers[l].mask,
                                         hyper.floor_upsilon, cfg.sigma2, train.size(),
                                         curv.loss);
                rec.active_weights = net.layers[l].active_count();
                cost_total += rec.cost.total;
                cost_log.push_back(rec);
            }

            if (t >= cfg.prune_start_iter) {
                removed = prune(net, hyper, cfg.kappa_upsilon, cfg.kappa_w);
            }
        }

        IterRecord rec;
        rec.iter = t;
        rec.train_rmse = dataset_rmse(net, train, norm);
        if (has_val) rec.val_rmse = dataset_rmse(net, val, norm);
        rec.cost_total = cost_total;
        rec.sparsity = sparsity(net);
        rec.active_weights = net.active_weight_count();
        rec.pruned_this_iter = removed;
        history.push_back(rec);
        log_info("iter " + std::to_string(t) + " train_rmse " + std::to_string(rec.train_rmse) +
                 " active " + std::to_string(rec.active_weights));

        if (sink && cfg.checkpoint_every > 0 && t % cfg.checkpoint_every == 0 && t < cfg.t_max) {
            Checkpoint ck;
            ck.next_iter = t + 1;
            ck.net = net;
            ck.hyper = hyper;
            ck.batch_rng_state = batch_rng.save_state();
            ck.history = history;
            ck.cost_log = cost_log;
            ck.norm = norm;
            sink(ck);
        }

        if (cfg.patience > 0) {
            const double watch = has_val ? rec.val_rmse : rec.train_rmse;
            if (watch < best_watch - 1e-12) {
                best_watch = watch;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                log_info("early stop at iteration " + std::to_string(t));
                break;
            }
        }
    }

    TrainedModel model;
    model.net = std::move(net);
    model.hyper = std::move(hyper);
    model.history = std::move(history);
    model.cost_log = std::move(cost_log);
    model.norm = norm;
    model.n_a = train.n_a;
    model.n_b = train.n_b;
    return model;
}

}  // namespace sparsid
