#include "vale/partition.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "vale/error.hpp"
#include "vale/simd/kernels.hpp"

namespace vale {

SuperpixelPartition::SuperpixelPartition(int width, int height, std::vector<std::int32_t> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  if (width <= 0 || height <= 0) throw InputError("partition dimensions must be positive");
  if (labels_.size() != static_cast<std::size_t>(width) * height)
    throw InputError("partition label count does not match image size");

  std::vector<std::int32_t> remap;
  std::int32_t next = 0;
  for (auto& id : labels_) {
    if (id < 0) throw InputError("negative region id");
    if (static_cast<std::size_t>(id) >= remap.size()) remap.resize(static_cast<std::size_t>(id) + 1, -1);
    if (remap[id] < 0) remap[id] = next++;
    id = remap[id];
  }

  centroids_.assign(next, {});
  sizes_.assign(next, 0);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      auto id = label(r, c);
      centroids_[id].row += r;
      centroids_[id].col += c;
      ++sizes_[id];
    }
  for (int id = 0; id < next; ++id) {
    centroids_[id].row /= static_cast<double>(sizes_[id]);
    centroids_[id].col /= static_cast<double>(sizes_[id]);
  }
}

Pixel SuperpixelPartition::representative_pixel(int id) const {
  const Centroid& c = centroids_.at(id);
  Pixel rounded{static_cast<int>(std::lround(c.row)), static_cast<int>(std::lround(c.col))};
  rounded.row = std::clamp(rounded.row, 0, height_ - 1);
  rounded.col = std::clamp(rounded.col, 0, width_ - 1);
  if (label(rounded.row, rounded.col) == id) return rounded;

  Pixel best = rounded;
  double bestDist = std::numeric_limits<double>::infinity();
  for (int r = 0; r < height_; ++r)
    for (int col = 0; col < width_; ++col) {
      if (label(r, col) != id) continue;
      double d = (r - c.row) * (r - c.row) + (col - c.col) * (col - c.col);
      if (d < bestDist) {
        bestDist = d;
        best = {r, col};
      }
    }
  return best;
}

Coalition::Coalition(int regionCount, std::initializer_list<int> ids) : members_(regionCount, 0) {
  for (int id : ids) members_.at(id) = 1;
}

Coalition Coalition::from_bits(int regionCount, std::uint64_t bits) {
  Coalition c(regionCount);
  for (int i = 0; i < regionCount; ++i) c.members_[i] = (bits >> i) & 1u;
  return c;
}

int Coalition::size() const { return static_cast<int>(std::count(members_.begin(), members_.end(), 1)); }

Coalition Coalition::complement() const {
  Coalition c = *this;
  for (auto& m : c.members_) m = m ? 0 : 1;
  return c;
}

void MaskingPolicy::validate() const {
  if (mode == Mode::fixed_color && !(fillValue >= 0.0f && fillValue <= 1.0f))
    throw ConfigError("masking fill value must lie in [0,1]");
  if (mode == Mode::blur && blurRadius < 1) throw ConfigError("blur radius must be >= 1");
}

const char* to_string(MaskingPolicy::Mode mode) {
  switch (mode) {
    case MaskingPolicy::Mode::mean_fill: return "mean-fill";
    case MaskingPolicy::Mode::fixed_color: return "fixed-color";
    case MaskingPolicy::Mode::blur: return "blur";
  }
  return "blur";
}

MaskingPolicy::Mode parse_masking_mode(std::string_view name) {
  if (name == "mean-fill") return MaskingPolicy::Mode::mean_fill;
  if (name == "fixed-color") return MaskingPolicy::Mode::fixed_color;
  if (name == "blur") return MaskingPolicy::Mode::blur;
  throw ConfigError("unknown masking mode '" + std::string(name) + "'");
}

namespace {

// Start offsets of `parts` near-equal spans over `length`, remainder first.
std::vector<int> split_offsets(int length, int parts) {
  std::vector<int> offsets(parts + 1, 0);
  const int base = length / parts, extra = length % parts;
  for (int i = 0; i < parts; ++i) offsets[i + 1] = offsets[i] + base + (i < extra ? 1 : 0);
  return offsets;
}

std::vector<std::vector<float>> planes_of(const Image& image) {
  std::vector<std::vector<float>> planes(image.channels(), std::vector<float>(image.pixel_count()));
  auto data = image.data();
  for (std::size_t p = 0; p < image.pixel_count(); ++p)
    for (int k = 0; k < image.channels(); ++k) planes[k][p] = data[p * image.channels() + k];
  return planes;
}

std::vector<float> transpose(const std::vector<float>& plane, int width, int height) {
  std::vector<float> out(plane.size());
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) out[static_cast<std::size_t>(c) * height + r] = plane[static_cast<std::size_t>(r) * width + c];
  return out;
}

// Connected components (4-connectivity) of equal labels; -1 entries group too.
struct Components {
  std::vector<std::int32_t> id;            // per pixel
  std::vector<std::int32_t> label;         // per component
  std::vector<std::size_t> size;           // per component
};

Components connected_components(const std::vector<std::int32_t>& labels, int width, int height) {
  Components cc;
  cc.id.assign(labels.size(), -1);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < labels.size(); ++start) {
    if (cc.id[start] >= 0) continue;
    const auto comp = static_cast<std::int32_t>(cc.label.size());
    cc.label.push_back(labels[start]);
    cc.size.push_back(0);
    cc.id[start] = comp;
    stack.push_back(start);
    while (!stack.empty()) {
      std::size_t p = stack.back();
      stack.pop_back();
      ++cc.size[comp];
      const int r = static_cast<int>(p / width), c = static_cast<int>(p % width);
      const std::size_t nbrs[4] = {r > 0 ? p - width : p, r + 1 < height ? p + width : p, c > 0 ? p - 1 : p,
                                   c + 1 < width ? p + 1 : p};
      for (std::size_t q : nbrs)
        if (q != p && cc.id[q] < 0 && labels[q] == labels[start]) {
          cc.id[q] = comp;
          stack.push_back(q);
        }
    }
  }
  return cc;
}

// Keeps the largest fragment of every cluster and folds every other fragment
// into the largest resolved component it touches.
std::vector<std::int32_t> enforce_connectivity(const std::vector<std::int32_t>& labels, int width, int height) {
  Components cc = connected_components(labels, width, height);
  const std::size_t n = cc.label.size();
  std::int32_t maxLabel = 0;
  for (auto l : cc.label) maxLabel = std::max(maxLabel, l);
  std::vector<std::int32_t> largest(static_cast<std::size_t>(maxLabel) + 1, -1);
  for (std::size_t k = 0; k < n; ++k) {
    if (cc.label[k] < 0) continue;
    auto& best = largest[cc.label[k]];
    if (best < 0 || cc.size[k] > cc.size[best]) best = static_cast<std::int32_t>(k);
  }

  // target[k]: component whose final label k adopts; -1 while unresolved.
  std::vector<std::int32_t> target(n, -1);
  std::vector<std::size_t> totalSize(n, 0);
  for (std::size_t k = 0; k < n; ++k)
    if (cc.label[k] >= 0 && largest[cc.label[k]] == static_cast<std::int32_t>(k)) {
      target[k] = static_cast<std::int32_t>(k);
      totalSize[k] = cc.size[k];
    }

  std::vector<std::vector<std::int32_t>> adjacency(n);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const std::size_t p = static_cast<std::size_t>(r) * width + c;
      auto a = cc.id[p];
      if (c + 1 < width && cc.id[p + 1] != a) {
        adjacency[a].push_back(cc.id[p + 1]);
        adjacency[cc.id[p + 1]].push_back(a);
      }
      if (r + 1 < height && cc.id[p + width] != a) {
        adjacency[a].push_back(cc.id[p + width]);
        adjacency[cc.id[p + width]].push_back(a);
      }
    }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cc.size[a] > cc.size[b]; });
  bool pending = true;
  while (pending) {
    pending = false;
    bool progressed = false;
    for (std::size_t k : order) {
      if (target[k] >= 0) continue;
      std::int32_t pick = -1;
      for (auto nb : adjacency[k]) {
        if (target[nb] < 0) continue;
        auto root = target[nb];
        if (pick < 0 || totalSize[root] > totalSize[pick] || (totalSize[root] == totalSize[pick] && root < pick))
          pick = root;
      }
      if (pick < 0) {
        pending = true;
        continue;
      }
      target[k] = pick;
      totalSize[pick] += cc.size[k];
      progressed = true;
    }
    if (pending && !progressed) break;  // isolated orphans (only when nothing was kept)
  }

  std::vector<std::int32_t> out(labels.size());
  for (std::size_t p = 0; p < labels.size(); ++p) {
    auto t = target[cc.id[p]];
    out[p] = t >= 0 ? t : cc.id[p];
  }
  return out;
}

}  // namespace

SuperpixelPartition partition_grid(const Image& image, int rows, int cols) {
  if (rows < 1 || cols < 1 || rows * cols < 2) throw InputError("grid partition needs rows*cols >= 2");
  if (rows > image.height() || cols > image.width()) throw InputError("grid finer than the image");
  const auto rowOff = split_offsets(image.height(), rows);
  const auto colOff = split_offsets(image.width(), cols);
  std::vector<std::int32_t> labels(image.pixel_count());
  for (int gr = 0; gr < rows; ++gr)
    for (int r = rowOff[gr]; r < rowOff[gr + 1]; ++r)
      for (int gc = 0; gc < cols; ++gc)
        for (int c = colOff[gc]; c < colOff[gc + 1]; ++c)
          labels[static_cast<std::size_t>(r) * image.width() + c] = gr * cols + gc;
  return SuperpixelPartition(image.width(), image.height(), std::move(labels));
}

SuperpixelPartition partition_slic(const Image& image, const SlicOptions& options) {
  const int width = image.width(), height = image.height();
  const auto pixels = static_cast<long long>(image.pixel_count());
  if (options.targetRegions < 2) throw InputError("SLIC needs targetRegions >= 2");
  if (options.targetRegions > pixels) throw InputError("SLIC targetRegions exceeds pixel count");
  if (options.iterations < 1) throw InputError("SLIC needs iterations >= 1");
  if (!(options.compactness >= 0.0) || !std::isfinite(options.compactness))
    throw InputError("SLIC compactness must be finite and non-negative");

  const int channels = image.channels();
  const auto planes = planes_of(image);
  const float* planePtrs[3] = {planes[0].data(), channels > 1 ? planes[1].data() : nullptr,
                               channels > 2 ? planes[2].data() : nullptr};

  int gridRows = static_cast<int>(std::lround(std::sqrt(static_cast<double>(options.targetRegions) * height / width)));
  gridRows = std::clamp(gridRows, 1, height);
  int gridCols = static_cast<int>(std::lround(static_cast<double>(options.targetRegions) / gridRows));
  gridCols = std::clamp(gridCols, 1, width);
  if (gridRows * gridCols < 2) {
    if (width >= 2)
      gridCols = 2;
    else
      gridRows = std::min(height, 2);
  }

  const auto rowOff = split_offsets(height, gridRows);
  const auto colOff = split_offsets(width, gridCols);
  const double step = std::max(static_cast<double>(height) / gridRows, static_cast<double>(width) / gridCols);

  auto value = [&](int k, int r, int c) { return planes[k][static_cast<std::size_t>(r) * width + c]; };
  auto gradient = [&](int r, int c) {
    float g = 0.0f;
    for (int k = 0; k < channels; ++k) {
      float dx = value(k, r, std::min(c + 1, width - 1)) - value(k, r, std::max(c - 1, 0));
      float dy = value(k, std::min(r + 1, height - 1), c) - value(k, std::max(r - 1, 0), c);
      g += dx * dx + dy * dy;
    }
    return g;
  };

  std::vector<simd::SlicCenter> centers;
  for (int gr = 0; gr < gridRows; ++gr)
    for (int gc = 0; gc < gridCols; ++gc) {
      int r0 = (rowOff[gr] + rowOff[gr + 1] - 1) / 2, c0 = (colOff[gc] + colOff[gc + 1] - 1) / 2;
      // Nudge off edges: lowest gradient in the 3x3 neighborhood.
      int br = r0, bc = c0;
      float bg = gradient(r0, c0);
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          int r = r0 + dr, c = c0 + dc;
          if (r < rowOff[gr] || r >= rowOff[gr + 1] || c < colOff[gc] || c >= colOff[gc + 1]) continue;
          float g = gradient(r, c);
          if (g < bg) bg = g, br = r, bc = c;
        }
      simd::SlicCenter center{};
      for (int k = 0; k < channels; ++k) center.features[k] = value(k, br, bc);
      center.row = static_cast<float>(br);
      center.col = static_cast<float>(bc);
      centers.push_back(center);
    }

  const auto& kern = simd::kernels();
  const float spatialWeight = static_cast<float>((options.compactness / step) * (options.compactness / step));
  const int window = static_cast<int>(std::ceil(step));
  std::vector<float> bestDist(image.pixel_count());
  std::vector<std::int32_t> bestLabel(image.pixel_count());

  for (int iter = 0; iter < options.iterations; ++iter) {
    std::fill(bestDist.begin(), bestDist.end(), std::numeric_limits<float>::infinity());
    std::fill(bestLabel.begin(), bestLabel.end(), -1);
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const auto& ctr = centers[k];
      const int cr = static_cast<int>(std::lround(ctr.row)), cc = static_cast<int>(std::lround(ctr.col));
      const int r0 = std::max(0, cr - window), r1 = std::min(height, cr + window + 1);
      const int c0 = std::max(0, cc - window), c1 = std::min(width, cc + window + 1);
      for (int r = r0; r < r1; ++r) {
        const std::size_t rowStart = static_cast<std::size_t>(r) * width;
        const float* rowPlanes[3] = {planePtrs[0] + rowStart, planePtrs[1] ? planePtrs[1] + rowStart : nullptr,
                                    planePtrs[2] ? planePtrs[2] + rowStart : nullptr};
        kern.slic_assign_row(rowPlanes, channels, r, c0, c1, ctr, spatialWeight, static_cast<std::int32_t>(k),
                             bestDist.data() + rowStart, bestLabel.data() + rowStart);
      }
    }

    std::vector<double> sums(centers.size() * 5, 0.0);
    std::vector<std::size_t> counts(centers.size(), 0);
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c) {
        auto l = bestLabel[static_cast<std::size_t>(r) * width + c];
        if (l < 0) continue;
        double* s = &sums[static_cast<std::size_t>(l) * 5];
        for (int k = 0; k < channels; ++k) s[k] += value(k, r, c);
        s[3] += r;
        s[4] += c;
        ++counts[l];
      }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (counts[k] == 0) continue;
      const double* s = &sums[k * 5];
      const double n = static_cast<double>(counts[k]);
      for (int ch = 0; ch < channels; ++ch) centers[k].features[ch] = static_cast<float>(s[ch] / n);
      centers[k].row = static_cast<float>(s[3] / n);
      centers[k].col = static_cast<float>(s[4] / n);
    }
  }

  return SuperpixelPartition(width, height, enforce_connectivity(bestLabel, width, height));
}

Image box_blur(const Image& image, int radius) {
  if (radius < 1) throw InputError("blur radius must be >= 1");
  const auto& kern = simd::kernels();
  const int w = image.width(), h = image.height();
  auto planes = planes_of(image);
  std::vector<float> tmp(image.pixel_count());
  for (auto& plane : planes) {
    kern.box_mean_columns(plane.data(), tmp.data(), w, h, radius);
    auto t = transpose(tmp, w, h);
    kern.box_mean_columns(t.data(), tmp.data(), h, w, radius);
    plane = transpose(tmp, h, w);
  }
  std::vector<float> out(image.value_count());
  for (std::size_t p = 0; p < image.pixel_count(); ++p)
    for (int k = 0; k < image.channels(); ++k) out[p * image.channels() + k] = std::clamp(planes[k][p], 0.0f, 1.0f);
  return Image(w, h, image.channels(), std::move(out));
}

namespace {

Image make_fill(const Image& image, const SuperpixelPartition& part, const MaskingPolicy& policy) {
  switch (policy.mode) {
    case MaskingPolicy::Mode::fixed_color: return Image(image.width(), image.height(), image.channels(), policy.fillValue);
    case MaskingPolicy::Mode::blur: return box_blur(image, policy.blurRadius);
    case MaskingPolicy::Mode::mean_fill: {
      const int ch = image.channels();
      std::vector<double> sums(static_cast<std::size_t>(part.region_count()) * ch, 0.0);
      auto data = image.data();
      auto labels = part.labels();
      for (std::size_t p = 0; p < image.pixel_count(); ++p)
        for (int k = 0; k < ch; ++k) sums[static_cast<std::size_t>(labels[p]) * ch + k] += data[p * ch + k];
      std::vector<float> out(image.value_count());
      for (std::size_t p = 0; p < image.pixel_count(); ++p) {
        const double n = static_cast<double>(part.region_sizes()[labels[p]]);
        for (int k = 0; k < ch; ++k)
          out[p * ch + k] = std::clamp(static_cast<float>(sums[static_cast<std::size_t>(labels[p]) * ch + k] / n), 0.0f, 1.0f);
      }
      return Image(image.width(), image.height(), ch, std::move(out));
    }
  }
  throw ConfigError("unknown masking mode");
}

}  // namespace

CoalitionMasker::CoalitionMasker(const Image& image, const SuperpixelPartition& partition, const MaskingPolicy& policy)
    : image_(image), partition_(partition) {
  if (image.width() != partition.width() || image.height() != partition.height())
    throw InputError("partition dimensions do not match the image");
  policy.validate();
  fill_ = make_fill(image, partition, policy);
}

Image CoalitionMasker::apply(const Coalition& coalition) const {
  if (coalition.region_count() != partition_.region_count())
    throw InputError("coalition region count does not match the partition");
  const int ch = image_.channels();
  auto labels = partition_.labels();
  auto members = coalition.membership();
  std::vector<std::uint8_t> keep(image_.value_count());
  for (std::size_t p = 0; p < image_.pixel_count(); ++p) {
    const std::uint8_t k = members[labels[p]];
    for (int c = 0; c < ch; ++c) keep[p * ch + c] = k;
  }
  std::vector<float> out(image_.value_count());
  simd::kernels().select_values(image_.data().data(), fill_.data().data(), keep.data(), out.data(), out.size());
  Image result = fill_;
  std::copy(out.begin(), out.end(), result.data().begin());
  return result;
}

Image mask_coalition(const Image& image, const SuperpixelPartition& partition, const Coalition& coalition,
                     const MaskingPolicy& policy) {
  return CoalitionMasker(image, partition, policy).apply(coalition);
}

}  // namespace vale
