#pragma once

// Data-parallel inner loops used by the kernel SVM, the mock embedding
// backend and the ONNX interpreter. Every routine has a scalar reference
// implementation; vector variants are selected once at runtime from the
// CPU feature set and must agree with the reference up to reassociation.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace lesion::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  double (*dot_f64)(const double* a, const double* b, std::size_t n);
  double (*squared_distance_f64)(const double* a, const double* b, std::size_t n);
  void (*axpy_f64)(double alpha, const double* x, double* y, std::size_t n);
  float (*dot_f32)(const float* a, const float* b, std::size_t n);
  void (*axpy_f32)(float alpha, const float* x, float* y, std::size_t n);
};

// Reference implementations; always available.
const KernelTable& scalar_kernels();

// ISAs compiled into this binary and supported by the running CPU.
// Scalar is always first.
std::vector<Isa> available_isas();

const KernelTable& kernels_for(Isa isa);

// The table used by the library. Chosen on first use: the widest available
// ISA, unless LESION_SIMD=scalar|avx2|neon names another available one.
Isa active_isa();
const KernelTable& active();

// Overrides the runtime choice (tests and benchmarking). Throws if the ISA
// is not available.
void set_active_isa(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot_f64(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance_f64(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy_f64(alpha, x.data(), y.data(), x.size());
}

inline float dot(std::span<const float> a, std::span<const float> b) {
  return active().dot_f32(a.data(), b.data(), a.size());
}

inline void axpy(float alpha, std::span<const float> x, std::span<float> y) {
  active().axpy_f32(alpha, x.data(), y.data(), x.size());
}

namespace detail {
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();
}  // namespace detail

}  // namespace lesion::simd
