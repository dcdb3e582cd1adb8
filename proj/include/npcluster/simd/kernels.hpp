#pragma once

// Distance kernels used by the neighbour search and K-Means. Each kernel has
// a portable scalar reference and, where the target supports it, an AVX2 or
// NEON variant. The variant is chosen once at runtime from CPU features and
// can be pinned with NPCLUSTER_SIMD=scalar|avx2|neon|auto.

#include <cstddef>
#include <span>
#include <string_view>

namespace npcluster::simd {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa) noexcept;

struct KernelTable {
    Isa isa;
    float (*squared_l2_f32)(const float* a, const float* b, std::size_t n);
    float (*dot_f32)(const float* a, const float* b, std::size_t n);
    double (*squared_l2_f64)(const double* a, const double* b, std::size_t n);
};

namespace scalar {
float squared_l2_f32(const float* a, const float* b, std::size_t n);
float dot_f32(const float* a, const float* b, std::size_t n);
double squared_l2_f64(const double* a, const double* b, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
float squared_l2_f32(const float* a, const float* b, std::size_t n);
float dot_f32(const float* a, const float* b, std::size_t n);
double squared_l2_f64(const double* a, const double* b, std::size_t n);
}  // namespace avx2
#endif

#if defined(__aarch64__) && defined(__ARM_NEON)
namespace neon {
float squared_l2_f32(const float* a, const float* b, std::size_t n);
float dot_f32(const float* a, const float* b, std::size_t n);
double squared_l2_f64(const double* a, const double* b, std::size_t n);
}  // namespace neon
#endif

bool isa_supported(Isa isa) noexcept;
Isa best_supported_isa() noexcept;

// Table for a specific ISA; throws PreconditionError when unsupported here.
const KernelTable& kernels_for(Isa isa);

// Active table (resolved on first call).
const KernelTable& kernels();

// Overrides the active table, e.g. to force the scalar reference path.
void set_active_isa(Isa isa);

inline float squared_l2(std::span<const float> a, std::span<const float> b) {
    return kernels().squared_l2_f32(a.data(), b.data(), a.size());
}

inline double squared_l2(std::span<const double> a, std::span<const double> b) {
    return kernels().squared_l2_f64(a.data(), b.data(), a.size());
}

}  // namespace npcluster::simd
