// SPDX-License-Identifier: Apache-2.0
//
// Fully-connected regression network with hand-written derivatives.
//
// Storage convention: W^l has shape n_{l-1} x n_l, so a batch forward step is
// H^l = A^{l-1} W^l + b^l and the scalar output makes the last layer a column.
// The loss is E(W) = (1/(2*sigma2*N)) * sum_t (y_t - yhat_t)^2, i.e. the batch
// mean of per-sample losses; gradients and curvature are batch means too, so
// hyper-parameter updates do not depend on the batch size.

#pragma once

#include <cstdint>
#include <vector>

#include "sparsid/core.hpp"

namespace sparsid {

enum class Activation { Sigmoid, Tanh, Relu };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& s);

struct LayerParams {
    Mat w;      // n_prev x n
    Vec b;      // n
    Mask mask;  // per weight entry; masked-out entries of w are exactly 0

    std::size_t in_width() const { return w.rows(); }
    std::size_t out_width() const { return w.cols(); }
    std::size_t active_count() const;
};

struct Network {
    std::vector<LayerParams> layers;
    Activation act = Activation::Tanh;

    std::size_t input_width() const { return layers.front().in_width(); }
    std::size_t output_width() const { return layers.back().out_width(); }
    std::size_t depth() const { return layers.size(); }
    std::size_t weight_count() const;
    std::size_t active_weight_count() const;

    /// Zeroes every weight whose mask entry is off.
    void enforce_mask();

    /// Glorot-uniform weights, zero biases. `widths` lists every layer width
    /// including input and output, e.g. {11, 100, 100, 1}.
    static Network init(const std::vector<std::size_t>& widths, Activation act,
                        std::uint64_t seed);
};

/// Cached per-layer pre-activations and activations for one batch.
/// a[0] is the input batch; h[l] and a[l] (l >= 1) belong to layer l;
/// the last layer is linear, so a.back() == h.back().
struct ForwardTrace {
    std::vector<Mat> h;  // h[0] unused
    std::vector<Mat> a;
    Vec yhat;            // column view of a.back() for scalar-output nets
    std::size_t batch = 0;
};

enum class CurvMode { ExactSmall, GaussNewtonDiag };

/// Per-layer derivative information at the expansion point.
///
/// hdiag is the factored diagonal hdiag(i,j) = m_diag(i) * h_pre(j,j):
/// input second moment times batch-mean pre-activation Hessian. ExactSmall
/// additionally materializes `full`, the batch mean over samples of
/// a^{l-1} a^{l-1}^T (x) H^l_t, whose entry order matches w traversed
/// row-major; it exists so tests can compare against finite differences.
struct LayerCurvature {
    Mat grad_w;      // dE/dW^l, batch mean, includes the 1/sigma2 factor
    Vec grad_b;
    Vec m_diag;      // mean over batch of a^{l-1}_i^2
    Mat h_pre;       // batch-mean pre-activation Hessian H^l (n_l x n_l)
    Mat hdiag;       // n_{l-1} x n_l
    Mat full;        // ExactSmall only, (n_{l-1}*n_l)^2
};

struct CurvatureBundle {
    std::vector<LayerCurvature> layers;
    double loss = 0.0;  // E at the expansion point
    bool has_curvature = false;
    CurvMode mode = CurvMode::GaussNewtonDiag;
};

/// Activation value, first and second derivative at h. Relu uses the
/// measure-zero convention f'(0) = 0, f''(0) = 0.
double act_eval(Activation a, double h);
double act_prime(Activation a, double h);
double act_second(Activation a, double h);

ForwardTrace forward(const Network& net, const Mat& z);

double loss_value(const ForwardTrace& trace, const Vec& targets, double sigma2);

/// Gradients only (loss filled in; curvature fields empty).
CurvatureBundle backward(const Network& net, const ForwardTrace& trace, const Vec& targets,
                         double sigma2);

/// Gradients plus curvature. GaussNewtonDiag drops the f'' term, which keeps
/// every pre-activation Hessian positive semidefinite and costs one extra
/// backward-style pass. ExactSmall keeps the f'' term and materializes the
/// full per-layer Hessian; rejected for layers with more than
/// `kExactSmallLimit` weights.
CurvatureBundle curvature(const Network& net, const ForwardTrace& trace, const Vec& targets,
                          double sigma2, CurvMode mode);

inline constexpr std::size_t kExactSmallLimit = 4096;

}  // namespace sparsid
