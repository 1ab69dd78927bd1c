#include <atomic>
#include <cstdlib>
#include <cstring>

#include "kernels_internal.hpp"

namespace vale::simd {

namespace {

constexpr KernelTable kScalar{Isa::scalar, detail::select_values_scalar, detail::box_mean_columns_scalar,
                              detail::heatmap_blend_scalar, detail::slic_assign_row_scalar};

#if VALE_HAVE_AVX2
constexpr KernelTable kAvx2{Isa::avx2, detail::select_values_avx2, detail::box_mean_columns_avx2,
                            detail::heatmap_blend_avx2, detail::slic_assign_row_avx2};

bool cpu_has_avx2() {
  static const bool has = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") != 0;
  }();
  return has;
}
#endif

const KernelTable* initial_table() {
  const char* env = std::getenv("VALE_SIMD");
  if (env && std::strcmp(env, "scalar") == 0) return &kScalar;
  if (const KernelTable* t = avx2_kernels()) return t;
  return &kScalar;
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const char* to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

const KernelTable& scalar_kernels() { return kScalar; }

const KernelTable* avx2_kernels() {
#if VALE_HAVE_AVX2
  return cpu_has_avx2() ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

bool select_isa(Isa isa) {
  const KernelTable* t = isa == Isa::scalar ? &kScalar : avx2_kernels();
  if (!t) return false;
  active().store(t, std::memory_order_release);
  return true;
}

}  // namespace vale::simd
