// Compiled with -mavx2 only; never called unless the CPU reports AVX2.
#include <immintrin.h>

#include "kernels_internal.hpp"

namespace vale::simd::detail {

void select_values_avx2(const float* src, const float* fill, const std::uint8_t* keep, float* out, std::size_t n) {
  std::size_t i = 0;
  const __m256i zero = _mm256_setzero_si256();
  for (; i + 8 <= n; i += 8) {
    __m128i k8 = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(keep + i));
    __m256i k32 = _mm256_cvtepu8_epi32(k8);
    __m256 takeFill = _mm256_castsi256_ps(_mm256_cmpeq_epi32(k32, zero));
    __m256 v = _mm256_blendv_ps(_mm256_loadu_ps(src + i), _mm256_loadu_ps(fill + i), takeFill);
    _mm256_storeu_ps(out + i, v);
  }
  select_values_scalar(src + i, fill + i, keep + i, out + i, n - i);
}

void box_mean_columns_avx2(const float* src, float* dst, int width, int height, int radius) {
  for (int r = 0; r < height; ++r) {
    const int lo = r - radius < 0 ? 0 : r - radius;
    const int hi = r + radius >= height ? height - 1 : r + radius;
    const float count = static_cast<float>(hi - lo + 1);
    const __m256 vcount = _mm256_set1_ps(count);
    int x = 0;
    for (; x + 8 <= width; x += 8) {
      __m256 sum = _mm256_setzero_ps();
      for (int rr = lo; rr <= hi; ++rr) sum = _mm256_add_ps(sum, _mm256_loadu_ps(src + static_cast<std::size_t>(rr) * width + x));
      _mm256_storeu_ps(dst + static_cast<std::size_t>(r) * width + x, _mm256_div_ps(sum, vcount));
    }
    for (; x < width; ++x) {
      float sum = 0.0f;
      for (int rr = lo; rr <= hi; ++rr) sum += src[static_cast<std::size_t>(rr) * width + x];
      dst[static_cast<std::size_t>(r) * width + x] = sum / count;
    }
  }
}

void heatmap_blend_avx2(const float* gray, const float* weight, float alpha, float* red, float* green, float* blue,
                        std::size_t n) {
  const __m256 valpha = _mm256_set1_ps(alpha);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 zero = _mm256_setzero_ps();
  const __m256 absMask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 w = _mm256_loadu_ps(weight + i);
    __m256 a = _mm256_mul_ps(valpha, _mm256_and_ps(w, absMask));
    __m256 base = _mm256_mul_ps(_mm256_loadu_ps(gray + i), _mm256_sub_ps(one, a));
    __m256 pos = _mm256_cmp_ps(w, zero, _CMP_GT_OQ);
    __m256 neg = _mm256_cmp_ps(w, zero, _CMP_LT_OQ);
    _mm256_storeu_ps(red + i, _mm256_add_ps(base, _mm256_and_ps(a, pos)));
    _mm256_storeu_ps(green + i, base);
    _mm256_storeu_ps(blue + i, _mm256_add_ps(base, _mm256_and_ps(a, neg)));
  }
  heatmap_blend_scalar(gray + i, weight + i, alpha, red + i, green + i, blue + i, n - i);
}

void slic_assign_row_avx2(const float* const* planes, int channels, int row, int col0, int col1,
                          const SlicCenter& center, float spatialWeight, std::int32_t label, float* bestDist,
                          std::int32_t* bestLabel) {
  const float dyScalar = static_cast<float>(row) - center.row;
  const __m256 dy2 = _mm256_set1_ps(dyScalar * dyScalar);
  const __m256 ccol = _mm256_set1_ps(center.col);
  const __m256 weight = _mm256_set1_ps(spatialWeight);
  const __m256 lane = _mm256_setr_ps(0, 1, 2, 3, 4, 5, 6, 7);
  const __m256i vlabel = _mm256_set1_epi32(label);
  __m256 feat[3];
  for (int k = 0; k < channels; ++k) feat[k] = _mm256_set1_ps(center.features[k]);
  int x = col0;
  for (; x + 8 <= col1; x += 8) {
    __m256 dc = _mm256_setzero_ps();
    for (int k = 0; k < channels; ++k) {
      __m256 d = _mm256_sub_ps(_mm256_loadu_ps(planes[k] + x), feat[k]);
      dc = _mm256_add_ps(dc, _mm256_mul_ps(d, d));
    }
    __m256 xs = _mm256_add_ps(_mm256_set1_ps(static_cast<float>(x)), lane);
    __m256 dx = _mm256_sub_ps(xs, ccol);
    __m256 ds = _mm256_add_ps(dy2, _mm256_mul_ps(dx, dx));
    __m256 dist = _mm256_add_ps(dc, _mm256_mul_ps(weight, ds));
    __m256 best = _mm256_loadu_ps(bestDist + x);
    __m256 better = _mm256_cmp_ps(dist, best, _CMP_LT_OQ);
    _mm256_storeu_ps(bestDist + x, _mm256_blendv_ps(best, dist, better));
    __m256i labels = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(bestLabel + x));
    labels = _mm256_castps_si256(
        _mm256_blendv_ps(_mm256_castsi256_ps(labels), _mm256_castsi256_ps(vlabel), better));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(bestLabel + x), labels);
  }
  slic_assign_row_scalar(planes, channels, row, x, col1, center, spatialWeight, label, bestDist, bestLabel);
}

}  // namespace vale::simd::detail
