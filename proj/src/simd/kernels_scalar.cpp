#include "kernels_internal.hpp"

namespace vale::simd::detail {

void select_values_scalar(const float* src, const float* fill, const std::uint8_t* keep, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = keep[i] ? src[i] : fill[i];
}

void box_mean_columns_scalar(const float* src, float* dst, int width, int height, int radius) {
  for (int r = 0; r < height; ++r) {
    const int lo = r - radius < 0 ? 0 : r - radius;
    const int hi = r + radius >= height ? height - 1 : r + radius;
    const float count = static_cast<float>(hi - lo + 1);
    for (int x = 0; x < width; ++x) {
      float sum = 0.0f;
      for (int rr = lo; rr <= hi; ++rr) sum += src[static_cast<std::size_t>(rr) * width + x];
      dst[static_cast<std::size_t>(r) * width + x] = sum / count;
    }
  }
}

void heatmap_blend_scalar(const float* gray, const float* weight, float alpha, float* red, float* green, float* blue,
                          std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float w = weight[i];
    const float a = alpha * (w < 0.0f ? -w : w);
    const float base = gray[i] * (1.0f - a);
    red[i] = base + (w > 0.0f ? a : 0.0f);
    green[i] = base;
    blue[i] = base + (w < 0.0f ? a : 0.0f);
  }
}

void slic_assign_row_scalar(const float* const* planes, int channels, int row, int col0, int col1,
                            const SlicCenter& center, float spatialWeight, std::int32_t label, float* bestDist,
                            std::int32_t* bestLabel) {
  const float dy = static_cast<float>(row) - center.row;
  const float dy2 = dy * dy;
  for (int x = col0; x < col1; ++x) {
    float dc = 0.0f;
    for (int k = 0; k < channels; ++k) {
      const float d = planes[k][x] - center.features[k];
      dc = dc + d * d;
    }
    const float dx = static_cast<float>(x) - center.col;
    const float ds = dy2 + dx * dx;
    const float dist = dc + spatialWeight * ds;
    if (dist < bestDist[x]) {
      bestDist[x] = dist;
      bestLabel[x] = label;
    }
  }
}

}  // namespace vale::simd::detail
