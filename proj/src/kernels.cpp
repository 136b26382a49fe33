// SPDX-License-Identifier: Apache-2.0
//
// Backend selection. One choice per process; tests may force().

#include "sparsid/kernels.hpp"

#include <atomic>
#include <cstdlib>

#include "sparsid/core.hpp"

namespace sparsid::kernels {

bool avx2_supported() {
#if (defined(__x86_64__) || defined(__i386__)) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

std::atomic<const Ops*> g_active{nullptr};

const Ops* pick(const std::string& mode) {
    if (mode == "scalar") return &scalar_ops();
    if (mode == "avx2") {
        if (!avx2_supported()) throw ConfigError("SPARSID_KERNELS=avx2 but CPU lacks AVX2/FMA");
        return &avx2_ops();
    }
    if (mode == "auto" || mode.empty()) {
        return avx2_supported() ? &avx2_ops() : &scalar_ops();
    }
    throw ConfigError("unknown kernel backend '" + mode + "' (expected auto|scalar|avx2)");
}

}  // namespace

const Ops& active() {
    const Ops* ops = g_active.load(std::memory_order_acquire);
    if (!ops) {
        const char* env = std::getenv("SPARSID_KERNELS");
        ops = pick(env ? env : "auto");
        g_active.store(ops, std::memory_order_release);
        log_debug(std::string("kernel backend: ") + ops->name);
    }
    return *ops;
}

void force(const std::string& name) {
    g_active.store(pick(name), std::memory_order_release);
}

}  // namespace sparsid::kernels
