#pragma once

// Data-parallel pixel kernels. Every kernel has a scalar reference
// implementation and, where the target supports it, an AVX2 variant selected
// at runtime. Variants perform the same floating-point operations in the same
// order, so their outputs are bit-identical (checked by the equivalence tests).

#include <cstddef>
#include <cstdint>

namespace vale::simd {

enum class Isa { scalar, avx2 };

const char* to_string(Isa isa);

struct SlicCenter {
  float features[3];  // channel values; only the first `channels` are read
  float row;
  float col;
};

struct KernelTable {
  Isa isa;

  /// out[i] = keep[i] ? src[i] : fill[i]
  void (*select_values)(const float* src, const float* fill, const std::uint8_t* keep, float* out, std::size_t n);

  /// Vertical box mean over `width` independent columns of a row-major
  /// height x width plane. The window [r-radius, r+radius] is clipped to the
  /// plane and summed top to bottom.
  void (*box_mean_columns)(const float* src, float* dst, int width, int height, int radius);

  /// Diverging overlay: with a = alpha*|weight|, every channel becomes
  /// gray*(1-a), then red gains a where weight > 0 and blue gains a where
  /// weight < 0.
  void (*heatmap_blend)(const float* gray, const float* weight, float alpha, float* red, float* green, float* blue,
                        std::size_t n);

  /// One SLIC assignment sweep over columns [col0, col1) of row `row`:
  /// d = sum_k (plane_k - center_k)^2 + spatialWeight * ((row-cr)^2 + (col-cc)^2);
  /// where d < bestDist the pixel takes `label`. Plane and output pointers
  /// address the start of the row.
  void (*slic_assign_row)(const float* const* planes, int channels, int row, int col0, int col1,
                          const SlicCenter& center, float spatialWeight, std::int32_t label, float* bestDist,
                          std::int32_t* bestLabel);
};

const KernelTable& scalar_kernels();
/// Null when the binary lacks AVX2 code or the CPU lacks AVX2.
const KernelTable* avx2_kernels();

/// Table used by the library. Defaults to the widest supported ISA; the
/// environment variable VALE_SIMD=scalar forces the reference kernels.
const KernelTable& kernels();
/// Returns false (leaving the selection unchanged) if `isa` is unavailable.
bool select_isa(Isa isa);

}  // namespace vale::simd
