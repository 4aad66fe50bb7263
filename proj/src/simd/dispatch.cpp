#include <cstdlib>
#include <string_view>

#include "copo/simd/kernels.hpp"

namespace copo::simd {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

const KernelTable* kernels_for(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return &detail::kScalarKernels;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      if (__builtin_cpu_supports("avx2")) return detail::avx2_kernels();
#endif
      return nullptr;
    case Isa::neon:
      // Advanced SIMD is mandatory on AArch64.
      return detail::neon_kernels();
  }
  return nullptr;
}

namespace {

const KernelTable& select() {
  if (const char* forced = std::getenv("COPO_LAB_SIMD")) {
    const std::string_view name(forced);
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
      if (name == isa_name(isa)) {
        if (const KernelTable* k = kernels_for(isa)) return *k;
        return detail::kScalarKernels;
      }
    }
  }
  for (Isa isa : {Isa::avx2, Isa::neon}) {
    if (const KernelTable* k = kernels_for(isa)) return *k;
  }
  return detail::kScalarKernels;
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace copo::simd
