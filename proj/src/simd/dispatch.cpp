#include <cstdlib>
#include <cstring>

#include "sgls/simd/kernels.hpp"

namespace sgls::simd {

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& kernels_for(Isa isa) {
#if defined(__x86_64__) || defined(_M_X64)
  if (isa == Isa::avx2 && isa_available(Isa::avx2)) return detail::avx2_table;
#endif
  (void)isa;
  return detail::scalar_table;
}

namespace {

const KernelTable& select_table() {
  if (const char* forced = std::getenv("SGLS_SIMD"); forced && std::strcmp(forced, "scalar") == 0)
    return detail::scalar_table;
  return kernels_for(Isa::avx2);
}

}  // namespace

const KernelTable& kernels() {
  static const KernelTable& table = select_table();
  return table;
}

}  // namespace sgls::simd
