#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>

#include "lesion/error.hpp"
#include "lesion/simd.hpp"

namespace lesion::simd {

namespace detail {
#ifndef LESION_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif
#ifndef LESION_HAVE_NEON
const KernelTable* neon_kernels() { return nullptr; }
#endif
}  // namespace detail

namespace {

bool cpu_has_avx2() {
#if defined(LESION_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa pick_default() {
  const auto isas = available_isas();
  if (const char* env = std::getenv("LESION_SIMD")) {
    const std::string want = env;
    for (Isa isa : isas) {
      if (isa_name(isa) == want) return isa;
    }
  }
  return isas.back();
}

std::atomic<int>& active_slot() {
  static std::atomic<int> slot{static_cast<int>(pick_default())};
  return slot;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out{Isa::Scalar};
  if (detail::avx2_kernels() != nullptr && cpu_has_avx2()) out.push_back(Isa::Avx2);
  if (detail::neon_kernels() != nullptr) out.push_back(Isa::Neon);
  return out;
}

const KernelTable& kernels_for(Isa isa) {
  const KernelTable* table = nullptr;
  switch (isa) {
    case Isa::Scalar: table = &scalar_kernels(); break;
    case Isa::Avx2: table = cpu_has_avx2() ? detail::avx2_kernels() : nullptr; break;
    case Isa::Neon: table = detail::neon_kernels(); break;
  }
  if (table == nullptr) {
    throw ValidationError("SIMD variant '" + std::string(isa_name(isa)) + "' is not available");
  }
  return *table;
}

Isa active_isa() { return static_cast<Isa>(active_slot().load(std::memory_order_relaxed)); }

const KernelTable& active() {
  static thread_local int cached_isa = -1;
  static thread_local const KernelTable* cached = nullptr;
  const int now = active_slot().load(std::memory_order_relaxed);
  if (now != cached_isa) {
    cached = &kernels_for(static_cast<Isa>(now));
    cached_isa = now;
  }
  return *cached;
}

void set_active_isa(Isa isa) {
  (void)kernels_for(isa);
  active_slot().store(static_cast<int>(isa), std::memory_order_relaxed);
}

}  // namespace lesion::simd
