#include "hfsel/kernels.hpp"

#include <cstdlib>
#include <string>

namespace hfsel::kernels {

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar",           scalar::dot,          scalar::gather_dot,
                                 scalar::gather_dot_f32, scalar::prox_l1_step, scalar::prox_l2_step,
                                 scalar::l1_norm,    scalar::sq_norm,      scalar::diff_stats};
  return table;
}

bool cpu_has_avx2() {
#if defined(HFSEL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* avx2_table() {
#if defined(HFSEL_HAVE_AVX2)
  static const KernelTable table{"avx2",           avx2::dot,          avx2::gather_dot,
                                 avx2::gather_dot_f32, avx2::prox_l1_step, avx2::prox_l2_step,
                                 avx2::l1_norm,    avx2::sq_norm,      avx2::diff_stats};
  if (cpu_has_avx2()) return &table;
#endif
  return nullptr;
}

const KernelTable& active() {
  static const KernelTable& chosen = []() -> const KernelTable& {
    if (const char* env = std::getenv("HFSEL_SIMD"); env != nullptr && std::string(env) == "scalar") {
      return scalar_table();
    }
    if (const KernelTable* t = avx2_table()) return *t;
    return scalar_table();
  }();
  return chosen;
}

}  // namespace hfsel::kernels
