// SPDX-License-Identifier: Apache-2.0

#include "sparsid/mlp.hpp"

#include <cmath>

#include "sparsid/kernels.hpp"

namespace sparsid {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
    }
    return "?";
}

Activation activation_from_name(const std::string& s) {
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw ConfigError("unknown activation '" + s + "' (expected sigmoid|tanh|relu)");
}

double act_eval(Activation a, double h) {
    switch (a) {
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-h));
        case Activation::Tanh: return std::tanh(h);
        case Activation::Relu: return h > 0.0 ? h : 0.0;
    }
    return 0.0;
}

double act_prime(Activation a, double h) {
    switch (a) {
        case Activation::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-h));
            return s * (1.0 - s);
        }
        case Activation::Tanh: {
            const double t = std::tanh(h);
            return 1.0 - t * t;
        }
        case Activation::Relu: return h > 0.0 ? 1.0 : 0.0;
    }
    return 0.0;
}

double act_second(Activation a, double h) {
    switch (a) {
        case Activation::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-h));
            return s * (1.0 - s) * (1.0 - 2.0 * s);
        }
        case Activation::Tanh: {
            const double t = std::tanh(h);
            return -2.0 * t * (1.0 - t * t);
        }
        case Activation::Relu: return 0.0;
    }
    return 0.0;
}

std::size_t LayerParams::active_count() const {
    std::size_t n = 0;
    for (auto m : mask) n += m ? 1 : 0;
    return n;
}

std::size_t Network::weight_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size();
    return n;
}

std::size_t Network::active_weight_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.active_count();
    return n;
}

void Network::enforce_mask() {
    for (auto& l : layers) {
        for (std::size_t k = 0; k < l.w.size(); ++k) {
            if (!l.mask[k]) l.w[k] = 0.0;
        }
    }
}

Network Network::init(const std::vector<std::size_t>& widths, Activation act,
                      std::uint64_t seed) {
    if (widths.size() < 2) throw ConfigError("Network::init: need at least input and output widths");
    for (auto w : widths) {
        if (w == 0) throw ConfigError("Network::init: zero layer width");
    }
    RngStream rng(seed, "init");
    Network net;
    net.act = act;
    for (std::size_t l = 1; l < widths.size(); ++l) {
        LayerParams lay;
        lay.w = Mat(widths[l - 1], widths[l]);
        lay.b.assign(widths[l], 0.0);
        lay.mask.assign(widths[l - 1] * widths[l], 1);
        const double bound = std::sqrt(6.0 / double(widths[l - 1] + widths[l]));
        for (std::size_t k = 0; k < lay.w.size(); ++k) {
            lay.w[k] = rng.uniform(-bound, bound);
        }
        net.layers.push_back(std::move(lay));
    }
    return net;
}

ForwardTrace forward(const Network& net, const Mat& z) {
    if (z.cols() != net.input_width()) {
        throw ConfigError("forward: input width " + std::to_string(z.cols()) +
                          " != network input width " + std::to_string(net.input_width()));
    }
    const auto& K = kernels::active();
    const std::size_t L = net.depth();
    const std::size_t batch = z.rows();

    ForwardTrace tr;
    tr.batch = batch;
    tr.h.resize(L + 1);
    tr.a.resize(L + 1);
    tr.a[0] = z;

    for (std::size_t l = 1; l <= L; ++l) {
        const LayerParams& lay = net.layers[l - 1];
        const Mat& prev = tr.a[l - 1];
        const std::size_t m = lay.in_width();
        const std::size_t n = lay.out_width();
        Mat h(batch, n);
        for (std::size_t i = 0; i < batch; ++i) {
            double* hrow = h.row(i);
            const double* arow = prev.row(i);
            if (n == 1) {
                hrow[0] = lay.b[0] + K.dot(arow, lay.w.data(), m);
            } else {
                std::copy(lay.b.begin(), lay.b.end(), hrow);
                for (std::size_t k = 0; k < m; ++k) {
                    K.axpy(arow[k], lay.w.row(k), hrow, n);
                }
            }
        }
        if (l < L) {
            Mat a(batch, n);
            for (std::size_t k = 0; k < h.size(); ++k) a[k] = act_eval(net.act, h[k]);
            tr.a[l] = std::move(a);
        } else {
            tr.a[l] = h;  // output layer is linear
        }
        tr.h[l] = std::move(h);
    }

    const Mat& out = tr.a[L];
    tr.yhat.resize(batch);
    for (std::size_t i = 0; i < batch; ++i) tr.yhat[i] = out(i, 0);
    return tr;
}

double loss_value(const ForwardTrace& trace, const Vec& targets, double sigma2) {
    if (trace.batch != targets.size()) throw ConfigError("loss_value: target count mismatch");
    const double ss = kernels::active().sq_diff_sum(trace.yhat.data(), targets.data(),
                                                    targets.size());
    return ss / (2.0 * sigma2 * double(targets.size()));
}

namespace {

void check_trace(const Network& net, const ForwardTrace& trace, const Vec& targets) {
    if (trace.a.size() != net.depth() + 1 || trace.batch != targets.size() ||
        trace.a[0].cols() != net.input_width()) {
        throw ConfigError("stale forward trace: shapes do not match network/batch");
    }
    for (std::size_t l = 1; l <= net.depth(); ++l) {
        if (trace.h[l].cols() != net.layers[l - 1].out_width()) {
            throw ConfigError("stale forward trace: layer " + std::to_string(l) +
                              " width mismatch");
        }
    }
}

/// Shared gradient pass. Delta rows hold per-sample dE_t/dh^l without the 1/N
/// batch factor; G and grad_b divide by N at assembly.
void gradient_pass(const Network& net, const ForwardTrace& trace, const Vec& targets,
                   double sigma2, CurvatureBundle& out) {
    const auto& K = kernels::active();
    const std::size_t L = net.depth();
    const std::size_t N = trace.batch;
    const double inv_n = 1.0 / double(N);

    out.layers.resize(L);
    Mat delta(N, 1);
    for (std::size_t i = 0; i < N; ++i) {
        delta(i, 0) = (trace.yhat[i] - targets[i]) / sigma2;
    }

    for (std::size_t l = L; l >= 1; --l) {
        const LayerParams& lay = net.layers[l - 1];
        const Mat& a_prev = trace.a[l - 1];
        const std::size_t m = lay.in_width();
        const std::size_t n = lay.out_width();

        LayerCurvature& lc = out.layers[l - 1];
        lc.grad_w = Mat(m, n);
        lc.grad_b.assign(n, 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            const double* arow = a_prev.row(i);
            const double* drow = delta.row(i);
            for (std::size_t k = 0; k < m; ++k) {
                K.axpy(arow[k], drow, lc.grad_w.row(k), n);
            }
            K.axpy(1.0, drow, lc.grad_b.data(), n);
        }
        K.scal(inv_n, lc.grad_w.data(), lc.grad_w.size());
        K.scal(inv_n, lc.grad_b.data(), n);
        for (std::size_t k = 0; k < lc.grad_w.size(); ++k) {
            if (!lay.mask[k]) lc.grad_w[k] = 0.0;  // mask is absorbing
        }

        if (l > 1) {
            Mat prev_delta(N, m);
            const Mat& h_prev = trace.h[l - 1];
            for (std::size_t i = 0; i < N; ++i) {
                const double* drow = delta.row(i);
                double* prow = prev_delta.row(i);
                for (std::size_t k = 0; k < m; ++k) {
                    prow[k] = K.dot(lay.w.row(k), drow, n) * act_prime(net.act, h_prev(i, k));
                }
            }
            delta = std::move(prev_delta);
        }
    }
    out.loss = loss_value(trace, targets, sigma2);
}

}  // namespace

CurvatureBundle backward(const Network& net, const ForwardTrace& trace, const Vec& targets,
                         double sigma2) {
    check_trace(net, trace, targets);
    CurvatureBundle bundle;
    gradient_pass(net, trace, targets, sigma2, bundle);
    return bundle;
}

namespace {

/// Gauss-Newton curvature via the square-root recursion. With a scalar output
/// the GN pre-activation Hessian is rank one per sample, H^l_t = v v^T with
/// v^L = 1/sigma and v^{l-1} = f'(h^{l-1}) o (W^l v^l), so one backward-style
/// sweep yields the batch means of H^l and of a^2.
void gauss_newton_pass(const Network& net, const ForwardTrace& trace, double sigma2,
                       CurvatureBundle& out) {
    const auto& K = kernels::active();
    const std::size_t L = net.depth();
    const std::size_t N = trace.batch;

    std::vector<Vec> v(L + 1);
    for (std::size_t l = 1; l <= L; ++l) {
        const std::size_t n = net.layers[l - 1].out_width();
        v[l].assign(n, 0.0);
        LayerCurvature& lc = out.layers[l - 1];
        lc.h_pre = Mat(n, n);
        lc.m_diag.assign(net.layers[l - 1].in_width(), 0.0);
    }

    const double inv_sigma = 1.0 / std::sqrt(sigma2);
    for (std::size_t t = 0; t < N; ++t) {
        v[L][0] = inv_sigma;
        for (std::size_t l = L; l >= 1; --l) {
            const LayerParams& lay = net.layers[l - 1];
            const std::size_t m = lay.in_width();
            const std::size_t n = lay.out_width();
            LayerCurvature& lc = out.layers[l - 1];

            const double* vr = v[l].data();
            for (std::size_t j = 0; j < n; ++j) {
                K.axpy(vr[j], vr, lc.h_pre.row(j), n);
            }
            const double* arow = trace.a[l - 1].row(t);
            for (std::size_t k = 0; k < m; ++k) {
                lc.m_diag[k] += arow[k] * arow[k];
            }
            if (l > 1) {
                const Mat& h_prev = trace.h[l - 1];
                for (std::size_t k = 0; k < m; ++k) {
                    v[l - 1][k] = K.dot(lay.w.row(k), vr, n) * act_prime(net.act, h_prev(t, k));
                }
            }
        }
    }

    const double inv_n = 1.0 / double(N);
    for (std::size_t l = 1; l <= L; ++l) {
        LayerCurvature& lc = out.layers[l - 1];
        K.scal(inv_n, lc.h_pre.data(), lc.h_pre.size());
        K.scal(inv_n, lc.m_diag.data(), lc.m_diag.size());
    }
}

/// Exact curvature for small layers: per-sample pre-activation Hessians with
/// the f'' term, and the full per-layer Hessian as the batch mean of
/// a a^T (x) H^l_t (entry order = row-major W).
void exact_pass(const Network& net, const ForwardTrace& trace, const Vec& targets, double sigma2,
                CurvatureBundle& out) {
    const auto& K = kernels::active();
    const std::size_t L = net.depth();
    const std::size_t N = trace.batch;

    for (std::size_t l = 1; l <= L; ++l) {
        const LayerParams& lay = net.layers[l - 1];
        if (lay.w.size() > kExactSmallLimit) {
            throw ConfigError("curvature: exact_small requested on layer " + std::to_string(l) +
                              " with " + std::to_string(lay.w.size()) + " weights (limit " +
                              std::to_string(kExactSmallLimit) + ")");
        }
        LayerCurvature& lc = out.layers[l - 1];
        const std::size_t n = lay.out_width();
        lc.h_pre = Mat(n, n);
        lc.m_diag.assign(lay.in_width(), 0.0);
        lc.full = Mat(lay.w.size(), lay.w.size());
    }

    // per-sample buffers
    std::vector<Mat> hmat(L + 1);   // H^l for the current sample
    std::vector<Vec> dedA(L + 1);   // dE_t/da^l for the current sample

    for (std::size_t t = 0; t < N; ++t) {
        // backward sweep for dE_t/da at every hidden layer
        Vec delta{(trace.yhat[t] - targets[t]) / sigma2};  // dE_t/dh^L
        for (std::size_t l = L; l >= 2; --l) {
            const LayerParams& lay = net.layers[l - 1];
            const std::size_t m = lay.in_width();
            Vec da(m);
            for (std::size_t k = 0; k < m; ++k) {
                da[k] = K.dot(lay.w.row(k), delta.data(), lay.out_width());
            }
            dedA[l - 1] = da;
            Vec prev(m);
            for (std::size_t k = 0; k < m; ++k) {
                prev[k] = da[k] * act_prime(net.act, trace.h[l - 1](t, k));
            }
            delta = std::move(prev);
        }

        // Hessian recursion, output layer down
        hmat[L] = Mat(1, 1);
        hmat[L](0, 0) = 1.0 / sigma2;
        for (std::size_t l = L; l >= 1; --l) {
            const LayerParams& lay = net.layers[l - 1];
            const std::size_t m = lay.in_width();
            const std::size_t n = lay.out_width();
            LayerCurvature& lc = out.layers[l - 1];
            const Mat& h_l = hmat[l];

            // accumulate batch means
            for (std::size_t j = 0; j < n; ++j) {
                K.axpy(1.0, h_l.row(j), lc.h_pre.row(j), n);
            }
            const double* arow = trace.a[l - 1].row(t);
            for (std::size_t k = 0; k < m; ++k) lc.m_diag[k] += arow[k] * arow[k];
            // full(i*n+j, i'*n+j') += a_i a_i' H(j, j')
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    double* frow = lc.full.row(i * n + j);
                    for (std::size_t i2 = 0; i2 < m; ++i2) {
                        K.axpy(arow[i] * arow[i2], h_l.row(j), frow + i2 * n, n);
                    }
                }
            }

            if (l > 1) {
                // H^{l-1} = B (W H W^T) B + D, with B = diag(f'(h^{l-1})),
                // D = diag(f''(h^{l-1}) o dE/da^{l-1})
                Mat wh(m, n);  // W * H
                for (std::size_t k = 0; k < m; ++k) {
                    for (std::size_t j = 0; j < n; ++j) {
                        K.axpy(lay.w(k, j), h_l.row(j), wh.row(k), n);
                    }
                }
                Mat hp(m, m);
                for (std::size_t k = 0; k < m; ++k) {
                    for (std::size_t k2 = 0; k2 < m; ++k2) {
                        hp(k, k2) = K.dot(wh.row(k), lay.w.row(k2), n);
                    }
                }
                const Mat& h_prev = trace.h[l - 1];
                for (std::size_t k = 0; k < m; ++k) {
                    const double bk = act_prime(net.act, h_prev(t, k));
                    for (std::size_t k2 = 0; k2 < m; ++k2) {
                        hp(k, k2) *= bk * act_prime(net.act, h_prev(t, k2));
                    }
                    hp(k, k) += act_second(net.act, h_prev(t, k)) * dedA[l - 1][k];
                }
                hmat[l - 1] = std::move(hp);
            }
        }
    }

    const double inv_n = 1.0 / double(N);
    for (std::size_t l = 1; l <= L; ++l) {
        LayerCurvature& lc = out.layers[l - 1];
        K.scal(inv_n, lc.h_pre.data(), lc.h_pre.size());
        K.scal(inv_n, lc.m_diag.data(), lc.m_diag.size());
        K.scal(inv_n, lc.full.data(), lc.full.size());
    }
}

}  // namespace

CurvatureBundle curvature(const Network& net, const ForwardTrace& trace, const Vec& targets,
                          double sigma2, CurvMode mode) {
    check_trace(net, trace, targets);
    CurvatureBundle bundle;
    bundle.mode = mode;
    gradient_pass(net, trace, targets, sigma2, bundle);

    if (mode == CurvMode::GaussNewtonDiag) {
        gauss_newton_pass(net, trace, sigma2, bundle);
    } else {
        exact_pass(net, trace, targets, sigma2, bundle);
    }

    // factored diagonal, both modes: hdiag(i,j) = m_diag(i) * h_pre(j,j)
    for (std::size_t l = 0; l < net.depth(); ++l) {
        LayerCurvature& lc = bundle.layers[l];
        const std::size_t m = net.layers[l].in_width();
        const std::size_t n = net.layers[l].out_width();
        lc.hdiag = Mat(m, n);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                lc.hdiag(i, j) = lc.m_diag[i] * lc.h_pre(j, j);
            }
        }
    }
    bundle.has_curvature = true;
    return bundle;
}

}  // namespace sparsid
