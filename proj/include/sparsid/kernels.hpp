// SPDX-License-Identifier: Apache-2.0
//
// Double-precision kernels behind the hot loops: dot products, axpy
// accumulation, elementwise products and the weighted soft-threshold.
//
// Two backends ship: a scalar reference and an AVX2+FMA variant. The backend
// is picked once at startup from CPUID, overridable with
// SPARSID_KERNELS={auto|scalar|avx2} or force(). Per-element kernels
// (mul_ewise, soft_threshold) are bitwise identical across backends;
// reductions (dot, sum, ...) may differ in rounding because the AVX2 path
// reassociates, and are equivalence-tested against the scalar reference.

#pragma once

#include <cstddef>
#include <string>

namespace sparsid::kernels {

struct Ops {
    const char* name;

    // sum_i a[i]*b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // x[i] *= alpha
    void (*scal)(double alpha, double* x, std::size_t n);
    // out[i] = a[i] * b[i]
    void (*mul_ewise)(const double* a, const double* b, double* out, std::size_t n);
    // w[i] = sign(w[i]) * max(|w[i]| - thr[i], 0)
    void (*soft_threshold)(double* w, const double* thr, std::size_t n);
    // sum_i (a[i]-b[i])^2
    double (*sq_diff_sum)(const double* a, const double* b, std::size_t n);
    // sum_i a[i]
    double (*sum)(const double* a, std::size_t n);
    // sum_i |a[i]|
    double (*abs_sum)(const double* a, std::size_t n);
};

const Ops& scalar_ops();
const Ops& avx2_ops();  // valid only when avx2_supported()

bool avx2_supported();

/// Backend chosen at first use (env override honored); stable for the process.
const Ops& active();

/// Force a backend by name ("scalar", "avx2", "auto"). Throws on unknown name
/// or unsupported ISA. Intended for tests and benchmarking.
void force(const std::string& name);

}  // namespace sparsid::kernels
