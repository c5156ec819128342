#include "airfl/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace airfl::kern {

const Ops* avx2_ops_or_null();  // defined in kernels_avx2.cpp

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
    return avx2_ops_or_null() != nullptr && __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const Ops& avx2() {
    const Ops* ops = avx2_ops_or_null();
    if (!ops || !avx2_available())
        throw std::runtime_error("kernels: avx2 backend not available");
    return *ops;
}

namespace {

std::atomic<const Ops*> g_forced{nullptr};

const Ops& auto_select() {
    static const Ops& chosen = []() -> const Ops& {
        if (const char* env = std::getenv("AIRFL_KERNELS")) {
            if (std::strcmp(env, "scalar") == 0) return scalar();
            if (std::strcmp(env, "avx2") == 0) return avx2();
            if (*env != '\0' && std::strcmp(env, "auto") != 0)
                throw std::runtime_error(
                    "AIRFL_KERNELS must be scalar, avx2 or auto");
        }
        return avx2_available() ? avx2() : scalar();
    }();
    return chosen;
}

}  // namespace

const Ops& active() {
    if (const Ops* f = g_forced.load(std::memory_order_relaxed)) return *f;
    return auto_select();
}

void force(const char* name) {
    if (!name || std::strcmp(name, "auto") == 0) {
        g_forced.store(nullptr, std::memory_order_relaxed);
        return;
    }
    if (std::strcmp(name, "scalar") == 0) {
        g_forced.store(&scalar(), std::memory_order_relaxed);
        return;
    }
    if (std::strcmp(name, "avx2") == 0) {
        g_forced.store(&avx2(), std::memory_order_relaxed);
        return;
    }
    throw std::runtime_error("kernels: unknown backend name");
}

}  // namespace airfl::kern
