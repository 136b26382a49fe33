// SPDX-License-Identifier: Apache-2.0
//
// Backend equivalence: every AVX2 kernel against the scalar reference.
// Per-element kernels must agree bitwise; reductions within a reassociation
// tolerance.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sparsid/core.hpp"
#include "sparsid/kernels.hpp"

using namespace sparsid;

namespace {

const std::size_t kSizes[] = {0, 1, 3, 4, 5, 7, 8, 9, 31, 32, 33, 100, 1000};

Vec random_vec(RngStream& rng, std::size_t n, double scale = 1.0) {
    Vec v(n);
    for (auto& x : v) x = scale * rng.gaussian();
    return v;
}

}  // namespace

TEST_CASE("scalar kernels basic semantics") {
    const auto& K = kernels::scalar_ops();
    const double a[] = {1.0, 2.0, 3.0};
    const double b[] = {4.0, -5.0, 6.0};
    CHECK(K.dot(a, b, 3) == doctest::Approx(4.0 - 10.0 + 18.0));
    CHECK(K.sum(a, 3) == 6.0);
    CHECK(K.abs_sum(b, 3) == 15.0);
    CHECK(K.sq_diff_sum(a, b, 3) == doctest::Approx(9.0 + 49.0 + 9.0));

    double y[] = {1.0, 1.0, 1.0};
    K.axpy(2.0, a, y, 3);
    CHECK(y[0] == 3.0);
    CHECK(y[2] == 7.0);

    double w[] = {1.0, -1.0, 0.05, -0.05, 0.0};
    const double thr[] = {0.4, 0.4, 0.4, 0.4, 0.4};
    K.soft_threshold(w, thr, 5);
    CHECK(w[0] == doctest::Approx(0.6));
    CHECK(w[1] == doctest::Approx(-0.6));
    CHECK(w[2] == 0.0);  // exact zero, not epsilon
    CHECK(w[3] == 0.0);
    CHECK(w[4] == 0.0);
}

TEST_CASE("avx2 matches scalar" * doctest::skip(!kernels::avx2_supported())) {
    const auto& S = kernels::scalar_ops();
    const auto& V = kernels::avx2_ops();
    RngStream rng(42, "kernel-eq");

    for (std::size_t n : kSizes) {
        CAPTURE(n);
        const Vec a = random_vec(rng, n);
        const Vec b = random_vec(rng, n);

        // reductions: tolerate reassociation
        const double tol = 1e-13 * (1.0 + S.abs_sum(a.data(), n) + S.abs_sum(b.data(), n));
        CHECK(std::fabs(S.dot(a.data(), b.data(), n) - V.dot(a.data(), b.data(), n)) <= tol);
        CHECK(std::fabs(S.sum(a.data(), n) - V.sum(a.data(), n)) <= tol);
        CHECK(std::fabs(S.abs_sum(a.data(), n) - V.abs_sum(a.data(), n)) <= tol);
        CHECK(std::fabs(S.sq_diff_sum(a.data(), b.data(), n) -
                        V.sq_diff_sum(a.data(), b.data(), n)) <= 10 * tol);

        // per-element kernels: bitwise
        Vec m1(n), m2(n);
        S.mul_ewise(a.data(), b.data(), m1.data(), n);
        V.mul_ewise(a.data(), b.data(), m2.data(), n);
        CHECK(m1 == m2);

        Vec y1 = b, y2 = b;
        S.axpy(1.7, a.data(), y1.data(), n);
        V.axpy(1.7, a.data(), y2.data(), n);
        CHECK(y1 == y2);

        Vec x1 = a, x2 = a;
        S.scal(-0.37, x1.data(), n);
        V.scal(-0.37, x2.data(), n);
        CHECK(x1 == x2);

        Vec w1 = a, w2 = a;
        Vec thr = random_vec(rng, n);
        for (auto& t : thr) t = std::fabs(t) * 0.5;
        S.soft_threshold(w1.data(), thr.data(), n);
        V.soft_threshold(w2.data(), thr.data(), n);
        CHECK(w1 == w2);
    }
}

TEST_CASE("soft threshold properties") {
    const auto& K = kernels::active();
    RngStream rng(7, "prox");
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.index(64);
        Vec w = random_vec(rng, n);
        Vec thr = random_vec(rng, n);
        for (auto& t : thr) t = std::fabs(t);
        const Vec w0 = w;
        K.soft_threshold(w.data(), thr.data(), n);
        for (std::size_t i = 0; i < n; ++i) {
            if (std::fabs(w0[i]) <= thr[i]) {
                CHECK(w[i] == 0.0);
            } else {
                CHECK(w[i] * w0[i] > 0.0);  // sign preserved
                CHECK(std::fabs(w[i]) == doctest::Approx(std::fabs(w0[i]) - thr[i]));
            }
        }
    }
}

TEST_CASE("backend dispatch") {
    CHECK_NOTHROW(kernels::force("scalar"));
    CHECK(std::string(kernels::active().name) == "scalar");
    CHECK_THROWS_AS(kernels::force("sse9"), ConfigError);
    if (kernels::avx2_supported()) {
        kernels::force("avx2");
        CHECK(std::string(kernels::active().name) == "avx2");
    }
    kernels::force("auto");
}
