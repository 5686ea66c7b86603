#pragma once

// Data-parallel inner loops of the Galerkin arithmetic and the finite-volume
// update. Each kernel has a scalar reference implementation and, on x86-64,
// an AVX2 variant selected once at startup from CPUID. Elementwise kernels
// are bit-identical across variants; reductions agree to rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace sgls::simd {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // u -= scale * (right - left)
  void (*flux_update)(double* u, const double* right, const double* left, double scale,
                      std::size_t n);
  // out = 0.5 * (fl + fr) - 0.5 * sigma * (ur - ul)
  void (*llf_combine)(double* out, const double* fl, const double* fr, const double* ul,
                      const double* ur, double sigma, std::size_t n);
};

bool isa_available(Isa isa);

/// Kernel table for a specific instruction set. Requesting an unavailable
/// ISA returns the scalar table.
const KernelTable& kernels_for(Isa isa);

/// Table chosen at first use: the widest available ISA unless the
/// environment variable SGLS_SIMD=scalar forces the reference path.
const KernelTable& kernels();

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  kernels().axpy(a, x.data(), y.data(), x.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size());
}

namespace detail {
extern const KernelTable scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif
}  // namespace detail

}  // namespace sgls::simd
