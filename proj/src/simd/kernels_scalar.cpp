#include "sgls/simd/kernels.hpp"

namespace sgls::simd {
namespace {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void flux_update_scalar(double* u, const double* right, const double* left, double scale,
                        std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) u[i] -= scale * (right[i] - left[i]);
}

void llf_combine_scalar(double* out, const double* fl, const double* fr, const double* ul,
                        const double* ur, double sigma, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = 0.5 * (fl[i] + fr[i]) - 0.5 * sigma * (ur[i] - ul[i]);
}

}  // namespace

namespace detail {
const KernelTable scalar_table{Isa::scalar, axpy_scalar, dot_scalar, flux_update_scalar,
                               llf_combine_scalar};
}

}  // namespace sgls::simd
