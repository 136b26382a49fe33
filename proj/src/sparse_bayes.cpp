// SPDX-License-Identifier: Apache-2.0

#include "sparsid/sparse_bayes.hpp"

#include <algorithm>
#include <cmath>

namespace sparsid {

namespace {
constexpr double kOmegaFloor = 1e-12;
}

const char* granularity_name(Granularity g) {
    switch (g) {
        case Granularity::Shape: return "shape";
        case Granularity::Row: return "row";
        case Granularity::Column: return "column";
    }
    return "?";
}

Granularity granularity_from_name(const std::string& s) {
    if (s == "shape") return Granularity::Shape;
    if (s == "row") return Granularity::Row;
    if (s == "column") return Granularity::Column;
    throw ConfigError("unknown granularity '" + s + "' (expected shape|row|column)");
}

GroupMap group_map(std::size_t rows, std::size_t cols, Granularity g, std::size_t block_rows,
                   std::size_t block_cols) {
    GroupMap gm;
    gm.id.resize(rows * cols);
    switch (g) {
        case Granularity::Row:
            gm.count = static_cast<std::uint32_t>(rows);
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < cols; ++j) gm.id[i * cols + j] = std::uint32_t(i);
            }
            break;
        case Granularity::Column:
            gm.count = static_cast<std::uint32_t>(cols);
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < cols; ++j) gm.id[i * cols + j] = std::uint32_t(j);
            }
            break;
        case Granularity::Shape: {
            if (block_rows == 0) block_rows = 1;
            if (block_cols == 0) block_cols = 1;
            const std::size_t grid_cols = (cols + block_cols - 1) / block_cols;
            const std::size_t grid_rows = (rows + block_rows - 1) / block_rows;
            gm.count = static_cast<std::uint32_t>(grid_rows * grid_cols);
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < cols; ++j) {
                    gm.id[i * cols + j] =
                        std::uint32_t((i / block_rows) * grid_cols + (j / block_cols));
                }
            }
            break;
        }
    }
    return gm;
}

HyperState HyperState::init(const Network& net, Granularity g, std::size_t block_rows,
                            std::size_t block_cols, double floor_upsilon) {
    HyperState hs;
    hs.gran = g;
    hs.block_rows = block_rows;
    hs.block_cols = block_cols;
    hs.floor_upsilon = floor_upsilon;
    for (const auto& lay : net.layers) {
        hs.upsilon.emplace_back(lay.w.rows(), lay.w.cols(), 1.0);
        hs.alpha.emplace_back(lay.w.rows(), lay.w.cols(), 0.0);
        hs.omega.emplace_back(lay.w.rows(), lay.w.cols(), 1.0);
    }
    return hs;
}

Mat compute_c_diag(const Mat& upsilon, const Mat& hdiag, const Mask& mask) {
    Mat c(upsilon.rows(), upsilon.cols());
    for (std::size_t k = 0; k < upsilon.size(); ++k) {
        if (!mask[k]) continue;
        const double u = upsilon[k];
        if (u < 0.0 || !std::isfinite(u)) {
            throw NumericError("compute_C: invalid upsilon " + std::to_string(u) + " at entry " +
                               std::to_string(k));
        }
        c[k] = u / (1.0 + u * hdiag[k]);
    }
    return c;
}

namespace {

/// Cyclic Jacobi sweeps; used only to report the smallest eigenvalue of a
/// failing system.
double smallest_eigenvalue_sym(Mat a) {
    const std::size_t n = a.rows();
    for (int sweep = 0; sweep < 50; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        }
        if (off < 1e-22) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    double mn = a(0, 0);
    for (std::size_t i = 1; i < n; ++i) mn = std::min(mn, a(i, i));
    return mn;
}

}  // namespace

Mat compute_c_exact(const Mat& upsilon, const Mat& h_full, const Mask& mask) {
    // collect active indices
    std::vector<std::size_t> act;
    for (std::size_t k = 0; k < upsilon.size(); ++k) {
        if (mask[k]) act.push_back(k);
    }
    const std::size_t n = act.size();
    Mat c(upsilon.rows(), upsilon.cols());
    if (n == 0) return c;

    Mat a(n, n);
    for (std::size_t p = 0; p < n; ++p) {
        const double u = upsilon[act[p]];
        if (!(u > 0.0)) {
            throw NumericError("compute_C exact: active upsilon must be > 0 (entry " +
                               std::to_string(act[p]) + ")");
        }
        for (std::size_t q = 0; q < n; ++q) a(p, q) = h_full(act[p], act[q]);
        a(p, p) += 1.0 / u;
    }

    // Cholesky, then invert column by column; only the diagonal is kept
    Mat l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (!(s > 0.0)) {
                    const double ev = n <= 512 ? smallest_eigenvalue_sym(a) : s;
                    throw NumericError(
                        "compute_C exact: system not positive definite (smallest eigenvalue " +
                        std::to_string(ev) + ")");
                }
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    Vec col(n), x(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(col.begin(), col.end(), 0.0);
        col[j] = 1.0;
        // forward solve L z = e_j
        for (std::size_t i = 0; i < n; ++i) {
            double s = col[i];
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x[k];
            x[i] = s / l(i, i);
        }
        // back solve L^T y = z; only y[j] is needed
        for (std::size_t ii = n; ii-- > 0;) {
            double s = x[ii];
            for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
            x[ii] = s / l(ii, ii);
            if (ii == j) break;
        }
        c[act[j]] = x[j];
    }
    return c;
}

Mat update_alpha_from_c(const Mat& c_diag, const Mat& upsilon, const Mask& mask) {
    Mat alpha(upsilon.rows(), upsilon.cols());
    bool clamped = false;
    for (std::size_t k = 0; k < upsilon.size(); ++k) {
        if (!mask[k]) continue;
        const double u = upsilon[k];
        if (!(u > 0.0)) {
            throw NumericError("update_alpha: active upsilon must be > 0 (entry " +
                               std::to_string(k) + ")");
        }
        double a = -c_diag[k] / (u * u) + 1.0 / u;
        if (a < 0.0) {
            a = 0.0;
            clamped = true;
        }
        alpha[k] = a;
    }
    if (clamped) log_info("update_alpha: negative alpha clamped to 0 (indefinite curvature)");
    return alpha;
}

Mat update_alpha_closed(const Mat& hdiag, const Mat& upsilon, const Mask& mask) {
    Mat alpha(upsilon.rows(), upsilon.cols());
    for (std::size_t k = 0; k < upsilon.size(); ++k) {
        if (!mask[k]) continue;
        const double h = std::max(hdiag[k], 0.0);
        alpha[k] = h / (1.0 + upsilon[k] * h);
    }
    return alpha;
}

Mat update_omega(const Mat& alpha, const Mask& mask, const GroupMap& gm) {
    std::vector<double> sums(gm.count, 0.0);
    for (std::size_t k = 0; k < alpha.size(); ++k) {
        if (mask[k]) sums[gm.id[k]] += std::fabs(alpha[k]);
    }
    Mat omega(alpha.rows(), alpha.cols());
    for (std::size_t k = 0; k < alpha.size(); ++k) {
        if (mask[k]) omega[k] = std::sqrt(sums[gm.id[k]]);
    }
    return omega;
}

Mat update_upsilon(const Mat& w, const Mask& mask, const Mat& omega, const Mat& prev_upsilon,
                   const GroupMap& gm) {
    std::vector<double> sq(gm.count, 0.0);
    std::vector<double> om(gm.count, -1.0);
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (!mask[k]) continue;
        sq[gm.id[k]] += w[k] * w[k];
        om[gm.id[k]] = omega[k];  // broadcast value, identical within the group
    }
    Mat ups(w.rows(), w.cols());
    bool frozen = false;
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (!mask[k]) continue;
        const double og = om[gm.id[k]];
        if (og < kOmegaFloor) {
            // no shrinkage evidence for this group; dividing would blow up
            ups[k] = prev_upsilon[k];
            frozen = true;
        } else {
            ups[k] = std::sqrt(sq[gm.id[k]]) / og;
        }
    }
    if (frozen) log_debug("update_upsilon: group with omega < 1e-12 left unregularized");
    return ups;
}

RegEval regularizer(const Mat& w, const Mat& omega, const Mask& mask) {
    if (!w.same_shape(omega)) throw ConfigError("regularizer: shape mismatch");
    RegEval out;
    out.subgrad = Mat(w.rows(), w.cols());
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (!mask[k]) continue;
        out.value += std::fabs(omega[k] * w[k]);
        out.subgrad[k] = w[k] > 0.0 ? omega[k] : (w[k] < 0.0 ? -omega[k] : 0.0);
    }
    return out;
}

PosteriorMoments posterior_moments(const Mat& grad, const Mat& hdiag, const Mat& upsilon,
                                   const Mat& w_star, const Mask& mask) {
    PosteriorMoments pm;
    pm.sigma_diag = compute_c_diag(upsilon, hdiag, mask);
    pm.mu = Mat(grad.rows(), grad.cols());
    for (std::size_t k = 0; k < grad.size(); ++k) {
        if (!mask[k]) continue;
        pm.mu[k] = pm.sigma_diag[k] * (grad[k] + hdiag[k] * w_star[k]);
    }
    return pm;
}

CostReport marginal_cost(const Mat& w, const Mat& w_star, const Mat& grad, const Mat& hdiag,
                         const Mat& upsilon, const Mask& mask, double floor_upsilon,
                         double sigma2, std::size_t n_samples, double loss_at_w_star) {
    CostReport r;
    const std::size_t cols = w.cols();
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (!mask[k]) continue;
        const double u = upsilon[k];
        if (u < 0.0 || !std::isfinite(u)) {
            throw NumericError("marginal_cost: negative upsilon at entry (" +
                               std::to_string(k / cols) + "," + std::to_string(k % cols) + ")");
        }
        // entries below the upsilon floor count as removed, not inverted
        if (u < floor_upsilon) continue;
        const double h = hdiag[k];
        r.data_term += w[k] * h * w[k] + 2.0 * w[k] * (grad[k] - h * w_star[k]);
        r.reg_term += w[k] * w[k] / u;
        const double d = h + 1.0 / u;
        if (!(d > 0.0)) {
            throw NumericError("marginal_cost: nonpositive log-det argument at entry (" +
                               std::to_string(k / cols) + "," + std::to_string(k % cols) + ")");
        }
        r.logdet_upsilon += std::log(u);
        r.logdet_h_plus_inv += std::log(d);
        r.constant_term += w_star[k] * h * w_star[k] - 2.0 * w_star[k] * grad[k];
    }
    r.total = r.data_term + r.reg_term + r.logdet_upsilon + r.logdet_h_plus_inv;
    // -2 log[(2 pi sigma2)^{-N/2} b(W*, sigma2)], standard normalizer sign
    r.constant_term += double(n_samples) * std::log(2.0 * 3.14159265358979323846 * sigma2) +
                       2.0 * loss_at_w_star;
    return r;
}

std::vector<Mat> compute_C(const HyperState& hyper, const CurvatureBundle& curv,
                           const Network& net) {
    std::vector<Mat> c;
    for (std::size_t l = 0; l < net.depth(); ++l) {
        c.push_back(compute_c_diag(hyper.upsilon[l], curv.layers[l].hdiag, net.layers[l].mask));
    }
    return c;
}

std::vector<Mat> update_alpha(const std::vector<Mat>& c_diag, const HyperState& hyper,
                              const Network& net) {
    std::vector<Mat> a;
    for (std::size_t l = 0; l < net.depth(); ++l) {
        a.push_back(update_alpha_from_c(c_diag[l], hyper.upsilon[l], net.layers[l].mask));
    }
    return a;
}

void refresh_hyper(HyperState& hyper, const Network& net, const CurvatureBundle& curv) {
    if (!curv.has_curvature) throw ConfigError("refresh_hyper: bundle lacks curvature");
    for (std::size_t l = 0; l < net.depth(); ++l) {
        const LayerParams& lay = net.layers[l];
        const GroupMap gm =
            group_map(lay.w.rows(), lay.w.cols(), hyper.gran, hyper.block_rows, hyper.block_cols);
        Mat alpha_new = update_alpha_closed(curv.layers[l].hdiag, hyper.upsilon[l], lay.mask);
        Mat ups_new = update_upsilon(lay.w, lay.mask, hyper.omega[l], hyper.upsilon[l], gm);
        Mat omega_new = update_omega(alpha_new, lay.mask, gm);
        hyper.alpha[l] = std::move(alpha_new);
        hyper.upsilon[l] = std::move(ups_new);
        hyper.omega[l] = std::move(omega_new);
    }
}

}  // namespace sparsid
