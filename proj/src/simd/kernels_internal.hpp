#pragma once

#include "vale/simd/kernels.hpp"

namespace vale::simd::detail {

void select_values_scalar(const float* src, const float* fill, const std::uint8_t* keep, float* out, std::size_t n);
void box_mean_columns_scalar(const float* src, float* dst, int width, int height, int radius);
void heatmap_blend_scalar(const float* gray, const float* weight, float alpha, float* red, float* green, float* blue,
                          std::size_t n);
void slic_assign_row_scalar(const float* const* planes, int channels, int row, int col0, int col1,
                            const SlicCenter& center, float spatialWeight, std::int32_t label, float* bestDist,
                            std::int32_t* bestLabel);

#if VALE_HAVE_AVX2
void select_values_avx2(const float* src, const float* fill, const std::uint8_t* keep, float* out, std::size_t n);
void box_mean_columns_avx2(const float* src, float* dst, int width, int height, int radius);
void heatmap_blend_avx2(const float* gray, const float* weight, float alpha, float* red, float* green, float* blue,
                        std::size_t n);
void slic_assign_row_avx2(const float* const* planes, int channels, int row, int col0, int col1,
                          const SlicCenter& center, float spatialWeight, std::int32_t label, float* bestDist,
                          std::int32_t* bestLabel);
#endif

}  // namespace vale::simd::detail
