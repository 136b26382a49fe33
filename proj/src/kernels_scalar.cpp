// SPDX-License-Identifier: Apache-2.0
//
// Scalar reference kernels. Reductions accumulate strictly left to right;
// the AVX2 backend is tested against these.

#include "sparsid/kernels.hpp"

#include <cmath>

namespace sparsid::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scal_scalar(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void mul_ewise_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void soft_threshold_scalar(double* w, const double* thr, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double m = std::fabs(w[i]) - thr[i];
        w[i] = m > 0.0 ? std::copysign(m, w[i]) : 0.0;
    }
}

double sq_diff_sum_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double sum_scalar(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    return s;
}

double abs_sum_scalar(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::fabs(a[i]);
    return s;
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops{
        "scalar",          dot_scalar, axpy_scalar,        scal_scalar,
        mul_ewise_scalar,  soft_threshold_scalar,
        sq_diff_sum_scalar, sum_scalar, abs_sum_scalar,
    };
    return ops;
}

}  // namespace sparsid::kernels
