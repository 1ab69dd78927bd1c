#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vale/image.hpp"

namespace vale {

struct Centroid {
  double row = 0.0;
  double col = 0.0;
};

/// Labeling of every pixel into one of `region_count()` disjoint, non-empty
/// regions. These regions are the players of the attribution game.
class SuperpixelPartition {
 public:
  /// Relabels ids to 0..M-1 in order of first appearance (row-major) and
  /// computes centroids. Throws InputError if `labels` does not cover the image.
  SuperpixelPartition(int width, int height, std::vector<std::int32_t> labels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int region_count() const noexcept { return static_cast<int>(centroids_.size()); }
  std::span<const std::int32_t> labels() const noexcept { return labels_; }
  std::int32_t label(int row, int col) const { return labels_[static_cast<std::size_t>(row) * width_ + col]; }
  const std::vector<Centroid>& centroids() const noexcept { return centroids_; }
  const std::vector<std::size_t>& region_sizes() const noexcept { return sizes_; }

  /// Pixel of region `id` nearest its centroid (the centroid pixel itself for
  /// convex regions such as grid cells).
  Pixel representative_pixel(int id) const;

 private:
  int width_;
  int height_;
  std::vector<std::int32_t> labels_;
  std::vector<Centroid> centroids_;
  std::vector<std::size_t> sizes_;
};

/// Regions kept visible; everything else is masked.
class Coalition {
 public:
  Coalition() = default;
  explicit Coalition(int regionCount, bool full = false) : members_(regionCount, full ? 1 : 0) {}
  Coalition(int regionCount, std::initializer_list<int> ids);
  static Coalition from_bits(int regionCount, std::uint64_t bits);

  int region_count() const noexcept { return static_cast<int>(members_.size()); }
  bool contains(int id) const { return members_[id] != 0; }
  void insert(int id) { members_.at(id) = 1; }
  void erase(int id) { members_.at(id) = 0; }
  int size() const;
  Coalition complement() const;
  std::span<const std::uint8_t> membership() const noexcept { return members_; }

  friend bool operator==(const Coalition&, const Coalition&) = default;

 private:
  std::vector<std::uint8_t> members_;
};

struct MaskingPolicy {
  enum class Mode { mean_fill, fixed_color, blur };
  Mode mode = Mode::blur;
  float fillValue = 0.5f;  // fixed_color
  int blurRadius = 8;      // blur

  static MaskingPolicy mean_fill() { return {Mode::mean_fill, 0.5f, 8}; }
  static MaskingPolicy fixed_color(float value) { return {Mode::fixed_color, value, 8}; }
  static MaskingPolicy blur(int radius) { return {Mode::blur, 0.5f, radius}; }

  /// Throws ConfigError when the parameters violate their ranges.
  void validate() const;
};

const char* to_string(MaskingPolicy::Mode mode);
MaskingPolicy::Mode parse_masking_mode(std::string_view name);

/// Axis-aligned grid; leftover rows/columns go to the earliest cells.
SuperpixelPartition partition_grid(const Image& image, int rows, int cols);

struct SlicOptions {
  int targetRegions = 196;
  /// Weight of spatial distance relative to channel distance ([0,1] units).
  double compactness = 0.1;
  int iterations = 10;
};

/// Content-adaptive superpixels: k-means over (channel values, position)
/// restricted to a 2S x 2S window per center, followed by merging of
/// disconnected fragments into their largest touching neighbor.
SuperpixelPartition partition_slic(const Image& image, const SlicOptions& options);

/// Synthesizes masked images for many coalitions over one image; the fill
/// image for the policy is computed once on construction.
class CoalitionMasker {
 public:
  CoalitionMasker(const Image& image, const SuperpixelPartition& partition, const MaskingPolicy& policy);

  Image apply(const Coalition& coalition) const;
  const Image& fill_image() const noexcept { return fill_; }
  const Image& original() const noexcept { return image_; }
  const SuperpixelPartition& partition() const noexcept { return partition_; }

 private:
  Image image_;
  SuperpixelPartition partition_;
  Image fill_;
};

Image mask_coalition(const Image& image, const SuperpixelPartition& partition, const Coalition& coalition,
                     const MaskingPolicy& policy);

/// Separable clipped-window box blur, applied per channel.
Image box_blur(const Image& image, int radius);

}  // namespace vale
