#include <atomic>
#include <cstdlib>
#include <string>

#include "npcluster/errors.hpp"
#include "npcluster/simd/kernels.hpp"

namespace npcluster::simd {

namespace {

constexpr KernelTable kScalar{Isa::scalar, &scalar::squared_l2_f32, &scalar::dot_f32,
                              &scalar::squared_l2_f64};
#if defined(__x86_64__) || defined(_M_X64)
constexpr KernelTable kAvx2{Isa::avx2, &avx2::squared_l2_f32, &avx2::dot_f32, &avx2::squared_l2_f64};
#endif
#if defined(__aarch64__) && defined(__ARM_NEON)
constexpr KernelTable kNeon{Isa::neon, &neon::squared_l2_f32, &neon::dot_f32, &neon::squared_l2_f64};
#endif

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable* resolve_from_env() {
    const char* env = std::getenv("NPCLUSTER_SIMD");
    const std::string choice = env ? env : "auto";
    if (choice == "scalar") return &kernels_for(Isa::scalar);
    if (choice == "avx2") return &kernels_for(Isa::avx2);
    if (choice == "neon") return &kernels_for(Isa::neon);
    return &kernels_for(best_supported_isa());
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

bool isa_supported(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
#if (defined(__x86_64__) || defined(_M_X64)) && defined(__GNUC__)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::neon:
#if defined(__aarch64__) && defined(__ARM_NEON)
            return true;
#else
            return false;
#endif
    }
    return false;
}

Isa best_supported_isa() noexcept {
    if (isa_supported(Isa::avx2)) return Isa::avx2;
    if (isa_supported(Isa::neon)) return Isa::neon;
    return Isa::scalar;
}

const KernelTable& kernels_for(Isa isa) {
    if (!isa_supported(isa)) {
        throw PreconditionError("SIMD variant '" + std::string(isa_name(isa)) +
                                "' is not supported on this CPU");
    }
    switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
        case Isa::avx2: return kAvx2;
#endif
#if defined(__aarch64__) && defined(__ARM_NEON)
        case Isa::neon: return kNeon;
#endif
        default: return kScalar;
    }
}

const KernelTable& kernels() {
    const KernelTable* table = g_active.load(std::memory_order_acquire);
    if (table == nullptr) {
        table = resolve_from_env();
        const KernelTable* expected = nullptr;
        if (!g_active.compare_exchange_strong(expected, table, std::memory_order_acq_rel)) {
            table = expected;
        }
    }
    return *table;
}

void set_active_isa(Isa isa) { g_active.store(&kernels_for(isa), std::memory_order_release); }

}  // namespace npcluster::simd
