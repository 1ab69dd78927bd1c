#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vale {

struct Pixel {
  int row = 0;
  int col = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Row-major, channel-interleaved image with intensities in [0,1].
/// Channel count is 1 (gray) or 3 (RGB).
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0f);
  /// Takes ownership of `data`; throws InputError when any invariant fails.
  Image(int width, int height, int channels, std::vector<float> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  std::size_t value_count() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  float at(int row, int col, int channel = 0) const {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + channel];
  }
  float& at(int row, int col, int channel = 0) {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + channel];
  }

  bool contains(Pixel p) const noexcept { return p.row >= 0 && p.col >= 0 && p.row < height_ && p.col < width_; }
  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  /// Per-pixel mean over channels.
  float intensity(int row, int col) const;

  /// Values rounded to 8 bits, the representation carried over the wire.
  std::vector<std::uint8_t> to_bytes() const;
  static Image from_bytes(int width, int height, int channels, std::span<const std::uint8_t> bytes);

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Luma (ITU-R BT.601) single-channel copy; gray input is copied unchanged.
Image to_grayscale(const Image& image);
/// Three-channel copy; gray input is replicated.
Image to_rgb(const Image& image);
/// Bilinear resampling with half-pixel centers. Same-size input is returned as
/// an exact copy.
Image resize_bilinear(const Image& image, int width, int height);

/// Per-pixel boolean mask, row-major.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1

  Mask() = default;
  Mask(int w, int h, bool value = false)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, value ? 1 : 0) {}

  bool at(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col] != 0; }
  void set(int row, int col, bool v) { bits[static_cast<std::size_t>(row) * width + col] = v ? 1 : 0; }
  std::size_t area() const;
  friend bool operator==(const Mask&, const Mask&) = default;
};

double intersection_over_union(const Mask& a, const Mask& b);
/// True when every pixel set in `inner` is also set in `outer`.
bool is_subset(const Mask& inner, const Mask& outer);

}  // namespace vale
