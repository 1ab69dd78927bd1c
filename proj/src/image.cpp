#include "vale/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vale/error.hpp"

namespace vale {

namespace {

void check_shape(int width, int height, int channels) {
  if (width <= 0 || height <= 0) throw InputError("image dimensions must be positive");
  if (channels != 1 && channels != 3) throw InputError("image must have 1 or 3 channels, got " + std::to_string(channels));
}

}  // namespace

Image::Image(int width, int height, int channels, float fill) : width_(width), height_(height), channels_(channels) {
  check_shape(width, height, channels);
  if (!(fill >= 0.0f && fill <= 1.0f)) throw InputError("fill value outside [0,1]");
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Image::Image(int width, int height, int channels, std::vector<float> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  check_shape(width, height, channels);
  if (data_.size() != static_cast<std::size_t>(width) * height * channels)
    throw InputError("image data length does not match width*height*channels");
  for (float v : data_)
    if (!(v >= 0.0f && v <= 1.0f)) throw InputError("image value not finite or outside [0,1]");
}

float Image::intensity(int row, int col) const {
  if (channels_ == 1) return at(row, col);
  return (at(row, col, 0) + at(row, col, 1) + at(row, col, 2)) / 3.0f;
}

std::vector<std::uint8_t> Image::to_bytes() const {
  std::vector<std::uint8_t> out(data_.size());
  std::transform(data_.begin(), data_.end(), out.begin(),
                 [](float v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); });
  return out;
}

Image Image::from_bytes(int width, int height, int channels, std::span<const std::uint8_t> bytes) {
  std::vector<float> values(bytes.size());
  std::transform(bytes.begin(), bytes.end(), values.begin(), [](std::uint8_t b) { return b / 255.0f; });
  return Image(width, height, channels, std::move(values));
}

Image to_grayscale(const Image& image) {
  if (image.channels() == 1) return image;
  Image out(image.width(), image.height(), 1);
  auto src = image.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    float y = 0.299f * src[3 * p] + 0.587f * src[3 * p + 1] + 0.114f * src[3 * p + 2];
    dst[p] = std::clamp(y, 0.0f, 1.0f);
  }
  return out;
}

Image to_rgb(const Image& image) {
  if (image.channels() == 3) return image;
  Image out(image.width(), image.height(), 3);
  auto src = image.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < image.pixel_count(); ++p) dst[3 * p] = dst[3 * p + 1] = dst[3 * p + 2] = src[p];
  return out;
}

Image resize_bilinear(const Image& image, int width, int height) {
  if (width <= 0 || height <= 0) throw InputError("resize target must be positive");
  if (width == image.width() && height == image.height()) return image;
  Image out(width, height, image.channels());
  const double sy = static_cast<double>(image.height()) / height;
  const double sx = static_cast<double>(image.width()) / width;
  for (int r = 0; r < height; ++r) {
    double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, image.height() - 1);
    double wy = fy - y0;
    for (int c = 0; c < width; ++c) {
      double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, image.width() - 1);
      double wx = fx - x0;
      for (int ch = 0; ch < image.channels(); ++ch) {
        double top = image.at(y0, x0, ch) * (1 - wx) + image.at(y0, x1, ch) * wx;
        double bottom = image.at(y1, x0, ch) * (1 - wx) + image.at(y1, x1, ch) * wx;
        out.at(r, c, ch) = static_cast<float>(std::clamp(top * (1 - wy) + bottom * wy, 0.0, 1.0));
      }
    }
  }
  return out;
}

std::size_t Mask::area() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

double intersection_over_union(const Mask& a, const Mask& b) {
  if (a.width != b.width || a.height != b.height) throw InputError("mask dimensions differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += (a.bits[i] & b.bits[i]);
    uni += (a.bits[i] | b.bits[i]);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

bool is_subset(const Mask& inner, const Mask& outer) {
  if (inner.width != outer.width || inner.height != outer.height) return false;
  for (std::size_t i = 0; i < inner.bits.size(); ++i)
    if (inner.bits[i] && !outer.bits[i]) return false;
  return true;
}

}  // namespace vale
