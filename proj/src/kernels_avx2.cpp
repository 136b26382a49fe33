// SPDX-License-Identifier: Apache-2.0
//
// AVX2+FMA kernels. This translation unit is the only one built with
// -mavx2 -mfma; callers reach it through the dispatch table after a CPUID
// check. Per-element kernels round exactly like the scalar reference
// (no FMA there); reductions use 4 lanes and fold at the end.

#include "sparsid/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <cmath>

namespace sparsid::kernels {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        // mul then add (no FMA) so results match the scalar reference bitwise
        __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scal_avx2(double alpha, double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) x[i] *= alpha;
}

void mul_ewise_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void soft_threshold_avx2(double* w, const double* thr, std::size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d wv = _mm256_loadu_pd(w + i);
        __m256d sign = _mm256_and_pd(wv, sign_mask);
        __m256d mag = _mm256_andnot_pd(sign_mask, wv);
        __m256d shrunk = _mm256_max_pd(_mm256_sub_pd(mag, _mm256_loadu_pd(thr + i)), zero);
        _mm256_storeu_pd(w + i, _mm256_or_pd(shrunk, sign));
    }
    for (; i < n; ++i) {
        const double m = std::fabs(w[i]) - thr[i];
        w[i] = m > 0.0 ? std::copysign(m, w[i]) : 0.0;
    }
}

double sq_diff_sum_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double sum_avx2(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i];
    return s;
}

double abs_sum_avx2(const double* a, std::size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_andnot_pd(sign_mask, _mm256_loadu_pd(a + i)));
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += std::fabs(a[i]);
    return s;
}

}  // namespace

const Ops& avx2_ops() {
    static const Ops ops{
        "avx2",         dot_avx2, axpy_avx2,      scal_avx2,
        mul_ewise_avx2, soft_threshold_avx2,
        sq_diff_sum_avx2, sum_avx2, abs_sum_avx2,
    };
    return ops;
}

}  // namespace sparsid::kernels

#else  // non-x86: no AVX2 backend; dispatcher never offers it

namespace sparsid::kernels {
const Ops& avx2_ops() { return scalar_ops(); }
}  // namespace sparsid::kernels

#endif
