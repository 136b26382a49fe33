// SPDX-License-Identifier: Apache-2.0
//
// Evidence bookkeeping for the reweighted scheme: posterior variance C,
// intermediate alpha, group weights omega, prior variances upsilon, the
// weighted-l1 regularizer and the (diagonal-surrogate) marginal cost.
//
// Update cycle per outer iteration, in this order:
//   C     = (Upsilon^-1 + H)^-1              (diagonal surrogate)
//   alpha = -C/upsilon^2 + 1/upsilon         (== hdiag/(1 + upsilon*hdiag))
//   upsilon(new) = |W(new)| / omega(old)     (group form: ||W_g||_2 / omega_g)
//   omega(new)   = sqrt(sum of |alpha| over each group), broadcast per group.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparsid/core.hpp"
#include "sparsid/mlp.hpp"

namespace sparsid {

/// Sparsity group structure over a weight matrix. Shape partitions the matrix
/// into block_rows x block_cols tiles (1x1 by default, i.e. entrywise); Row
/// and Column group whole rows/columns.
enum class Granularity { Shape, Row, Column };

const char* granularity_name(Granularity g);
Granularity granularity_from_name(const std::string& s);

/// Entry -> group id map for one matrix.
struct GroupMap {
    std::vector<std::uint32_t> id;  // size rows*cols
    std::uint32_t count = 0;
};

GroupMap group_map(std::size_t rows, std::size_t cols, Granularity g, std::size_t block_rows,
                   std::size_t block_cols);

/// Per-layer hyper-parameters of the sparsity-inducing prior.
struct HyperState {
    std::vector<Mat> upsilon;  // prior variances, >= 0, pruned entries exactly 0
    std::vector<Mat> alpha;
    std::vector<Mat> omega;
    Granularity gran = Granularity::Row;
    std::size_t block_rows = 1, block_cols = 1;
    double floor_upsilon = 1e-10;

    /// upsilon = 1, omega = 1, alpha = 0 on every entry.
    static HyperState init(const Network& net, Granularity g, std::size_t block_rows = 1,
                           std::size_t block_cols = 1, double floor_upsilon = 1e-10);
};

// --- per-layer primitives ----------------------------------------------------
// All take the layer mask; masked entries yield 0 and never join group sums.

/// Diagonal-mode posterior variance C = 1/(1/upsilon + h), computed in the
/// overflow-free form upsilon/(1 + upsilon*h) so upsilon = 0 is harmless.
Mat compute_c_diag(const Mat& upsilon, const Mat& hdiag, const Mask& mask);

/// Dense-mode C for one layer: diagonal of (diag(1/upsilon) + H_full)^-1 over
/// active entries. H_full entry order matches row-major W. Errors on a
/// non-positive-definite system, reporting its smallest eigenvalue.
Mat compute_c_exact(const Mat& upsilon, const Mat& h_full, const Mask& mask);

/// Two-step alpha = -C/upsilon^2 + 1/upsilon. Requires active upsilon > 0.
Mat update_alpha_from_c(const Mat& c_diag, const Mat& upsilon, const Mask& mask);

/// Closed form alpha = h/(1 + upsilon*h); equals the two-step form for
/// diagonal C and tolerates upsilon = 0. Negative curvature clamps to 0.
Mat update_alpha_closed(const Mat& hdiag, const Mat& upsilon, const Mask& mask);

/// omega_g = sqrt(sum over group of |alpha|), broadcast over the group.
Mat update_omega(const Mat& alpha, const Mask& mask, const GroupMap& gm);

/// upsilon_g = ||W_g||_2 / omega_g broadcast over the group (entrywise
/// |W|/omega under 1x1 shape groups). Groups whose omega is below 1e-12 carry
/// no shrinkage pressure this iteration; their upsilon is kept at prev value.
Mat update_upsilon(const Mat& w, const Mask& mask, const Mat& omega, const Mat& prev_upsilon,
                   const GroupMap& gm);

struct RegEval {
    double value = 0.0;
    Mat subgrad;
};

/// R = sum |omega_ij * W_ij| with subgradient omega o sign(W), sign(0) = 0.
RegEval regularizer(const Mat& w, const Mat& omega, const Mask& mask);

struct PosteriorMoments {
    Mat mu;
    Mat sigma_diag;  // same values as compute_c_diag
};

/// Laplace posterior moments in the diagonal surrogate:
/// sigma = C, mu = C o (G + hdiag o W*).
PosteriorMoments posterior_moments(const Mat& grad, const Mat& hdiag, const Mat& upsilon,
                                   const Mat& w_star, const Mask& mask);

struct CostReport {
    double data_term = 0.0;         // W^T H W + 2 W^T (G - H W*)
    double reg_term = 0.0;          // W^T Upsilon^-1 W
    double logdet_upsilon = 0.0;    // log|Upsilon|
    double logdet_h_plus_inv = 0.0; // log|H + Upsilon^-1|
    double total = 0.0;             // sum of the four terms above
    double constant_term = 0.0;     // -N log(2 pi sigma2) - 2 log b(W*, sigma2); excluded from total
};

/// Marginal-likelihood cost with diagonal surrogates. Entries that are pruned
/// or whose upsilon sits below floor_upsilon contribute 0 (they are treated as
/// removed rather than inverted). loss_at_w_star is E(W*) for the constant.
CostReport marginal_cost(const Mat& w, const Mat& w_star, const Mat& grad, const Mat& hdiag,
                         const Mat& upsilon, const Mask& mask, double floor_upsilon,
                         double sigma2, std::size_t n_samples, double loss_at_w_star);

// --- whole-network wrappers ----------------------------------------------

std::vector<Mat> compute_C(const HyperState& hyper, const CurvatureBundle& curv,
                           const Network& net);
std::vector<Mat> update_alpha(const std::vector<Mat>& c_diag, const HyperState& hyper,
                              const Network& net);

/// One full hyper refresh after an inner solve: alpha from the old upsilon and
/// fresh curvature, upsilon from the new weights and old omega, omega last
/// from the new alpha. Mutates `hyper` in place.
void refresh_hyper(HyperState& hyper, const Network& net, const CurvatureBundle& curv);

}  // namespace sparsid
