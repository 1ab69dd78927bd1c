#include "vale/shap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include "vale/error.hpp"
#include "vale/simd/kernels.hpp"

namespace vale {

std::vector<double> FunctionGame::values(std::span<const Coalition> coalitions) const {
  std::vector<double> out;
  out.reserve(coalitions.size());
  for (const auto& c : coalitions) out.push_back(value_(c));
  return out;
}

std::vector<double> ImageGame::values(std::span<const Coalition> coalitions) const {
  std::vector<Image> batch;
  batch.reserve(coalitions.size());
  for (const auto& c : coalitions) batch.push_back(masker_.apply(c));
  auto preds = predictor_.predict(batch);
  if (preds.size() != batch.size()) throw ProtocolError("predictor returned the wrong number of predictions");
  std::vector<double> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(p.probability_of(targetLabel_));
  return out;
}

const char* to_string(Sampler sampler) { return sampler == Sampler::exact ? "exact" : "permutation"; }

Sampler parse_sampler(std::string_view name) {
  if (name == "exact") return Sampler::exact;
  if (name == "permutation") return Sampler::permutation;
  throw ConfigError("unknown sampler '" + std::string(name) + "'");
}

void EstimatorConfig::validate(int players) const {
  if (batchSize < 1) throw ConfigError("batch size must be >= 1");
  if (maxEvaluations < 1) throw ConfigError("maxEvaluations must be >= 1");
  if (sampler == Sampler::permutation && players > 0 && maxEvaluations < players + 2)
    throw ConfigError("maxEvaluations (" + std::to_string(maxEvaluations) + ") must be at least M+2 = " +
                      std::to_string(players + 2) + " for the permutation sampler");
}

namespace {

// Evaluates coalitions produced on demand by `make(i)` for i in [0, count),
// batchSize at a time, handing each value to `sink(i, v)`.
template <typename Make, typename Sink>
long long evaluate_batched(const CoalitionGame& game, std::size_t count, int batchSize, Make&& make, Sink&& sink) {
  std::vector<Coalition> batch;
  batch.reserve(static_cast<std::size_t>(batchSize));
  for (std::size_t start = 0; start < count; start += static_cast<std::size_t>(batchSize)) {
    const std::size_t end = std::min(count, start + static_cast<std::size_t>(batchSize));
    batch.clear();
    for (std::size_t i = start; i < end; ++i) batch.push_back(make(i));
    auto vals = game.values(batch);
    if (vals.size() != batch.size()) throw ProtocolError("game returned the wrong number of values");
    for (std::size_t i = start; i < end; ++i) sink(i, vals[i - start]);
  }
  return static_cast<long long>(count);
}

// Uniform integer in [0, bound) by rejection; independent of the standard
// library's distribution implementations so seeded runs match everywhere.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t x = rng();
    if (x >= threshold) return x % bound;
  }
}

void shuffle(std::vector<int>& order, std::mt19937_64& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);
}

}  // namespace

ShapleyValues exact_shapley(const CoalitionGame& game, int batchSize) {
  const int m = game.players();
  if (m < 1) throw InputError("game needs at least one player");
  if (m > kMaxExactPlayers)
    throw CapacityError("exact Shapley supports at most " + std::to_string(kMaxExactPlayers) + " players (got " +
                        std::to_string(m) + "); use the permutation sampler");
  if (batchSize < 1) throw ConfigError("batch size must be >= 1");

  const std::size_t subsets = std::size_t{1} << m;
  std::vector<double> v(subsets);
  ShapleyValues out;
  out.evaluations = evaluate_batched(
      game, subsets, batchSize, [m](std::size_t i) { return Coalition::from_bits(m, i); },
      [&v](std::size_t i, double value) { v[i] = value; });

  // weight[s] = s!(m-s-1)!/m! = 1 / (m * C(m-1, s))
  std::vector<double> weight(m);
  double binom = 1.0;
  for (int s = 0; s < m; ++s) {
    weight[s] = 1.0 / (m * binom);
    binom = binom * (m - 1 - s) / (s + 1);
  }

  out.values.assign(m, 0.0);
  for (int i = 0; i < m; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double phi = 0.0;
    for (std::size_t s = 0; s < subsets; ++s) {
      if (s & bit) continue;
      phi += weight[std::popcount(s)] * (v[s | bit] - v[s]);
    }
    out.values[i] = phi;
  }
  out.baseValue = v[0];
  out.fullValue = v[subsets - 1];
  return out;
}

ShapleyValues sampled_shapley(const CoalitionGame& game, const EstimatorConfig& cfg) {
  const int m = game.players();
  if (m < 1) throw InputError("game needs at least one player");
  cfg.validate(m);

  ShapleyValues out;
  {
    std::vector<Coalition> ends{Coalition(m, false), Coalition(m, true)};
    auto vals = game.values(ends);
    if (vals.size() != 2) throw ProtocolError("game returned the wrong number of values");
    out.baseValue = vals[0];
    out.fullValue = vals[1];
    out.evaluations = 2;
  }
  const double total = out.fullValue - out.baseValue;
  if (m == 1) {
    out.values = {total};
    return out;
  }

  const long long interior = m - 1;
  const long long budget = cfg.maxEvaluations - 2;
  const long long pairs = budget / (2 * interior);
  const long long walks = pairs > 0 ? 2 * pairs : 1;

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::vector<int>> orders;
  orders.reserve(static_cast<std::size_t>(walks));
  std::vector<int> base(m);
  std::iota(base.begin(), base.end(), 0);
  for (long long w = 0; w < walks; w += 2) {
    std::vector<int> order = base;
    shuffle(order, rng);
    orders.push_back(order);
    if (w + 1 < walks) {
      std::reverse(order.begin(), order.end());
      orders.push_back(std::move(order));
    }
  }

  // prefix[w][j] = v(first j+1 players of walk w), j < m-1
  std::vector<double> prefix(static_cast<std::size_t>(walks * interior));
  out.evaluations += evaluate_batched(
      game, prefix.size(), cfg.batchSize,
      [&](std::size_t i) {
        const auto& order = orders[i / interior];
        const auto len = static_cast<int>(i % interior) + 1;
        Coalition c(m);
        for (int j = 0; j < len; ++j) c.insert(order[j]);
        return c;
      },
      [&](std::size_t i, double value) { prefix[i] = value; });

  std::vector<double> sum(m, 0.0);
  for (long long w = 0; w < walks; ++w) {
    const auto& order = orders[w];
    double prev = out.baseValue;
    for (int j = 0; j < m; ++j) {
      const double cur = j + 1 < m ? prefix[static_cast<std::size_t>(w * interior + j)] : out.fullValue;
      sum[order[j]] += cur - prev;
      prev = cur;
    }
  }
  out.values.resize(m);
  for (int i = 0; i < m; ++i) out.values[i] = sum[i] / static_cast<double>(walks);
  out.permutations = static_cast<int>(walks);

  const double residual = std::accumulate(out.values.begin(), out.values.end(), 0.0) - total;
  double mass = 0.0;
  for (double v : out.values) mass += std::abs(v);
  for (double& v : out.values) v -= mass > 0.0 ? residual * std::abs(v) / mass : residual / m;
  return out;
}

AttributionMap make_attribution_map(std::shared_ptr<const SuperpixelPartition> partition, const ShapleyValues& values,
                                    std::string targetLabel) {
  if (!partition) throw InputError("attribution map needs a partition");
  if (static_cast<int>(values.values.size()) != partition->region_count())
    throw InputError("one attribution per region required");
  AttributionMap map;
  map.regionValues = values.values;
  for (double v : map.regionValues)
    if (!std::isfinite(v)) throw InputError("attribution not finite");
  map.pixelValues.resize(partition->labels().size());
  std::transform(partition->labels().begin(), partition->labels().end(), map.pixelValues.begin(),
                 [&](std::int32_t id) { return map.regionValues[id]; });
  map.partition = std::move(partition);
  map.targetLabel = std::move(targetLabel);
  map.baseValue = values.baseValue;
  map.fullValue = values.fullValue;
  map.evaluations = values.evaluations;
  return map;
}

AttributionMap shapley_exact(const Predictor& predictor, const Image& image,
                             std::shared_ptr<const SuperpixelPartition> partition, const MaskingPolicy& policy,
                             const std::string& targetLabel, int batchSize) {
  if (!partition) throw InputError("shapley_exact needs a partition");
  CoalitionMasker masker(image, *partition, policy);
  ImageGame game(predictor, masker, targetLabel);
  return make_attribution_map(std::move(partition), exact_shapley(game, batchSize), targetLabel);
}

AttributionMap shapley_sampled(const Predictor& predictor, const Image& image,
                               std::shared_ptr<const SuperpixelPartition> partition, const MaskingPolicy& policy,
                               const std::string& targetLabel, const EstimatorConfig& cfg) {
  if (!partition) throw InputError("shapley_sampled needs a partition");
  CoalitionMasker masker(image, *partition, policy);
  ImageGame game(predictor, masker, targetLabel);
  return make_attribution_map(std::move(partition), sampled_shapley(game, cfg), targetLabel);
}

AttributionMap explain_image(const Predictor& predictor, const Image& image,
                             std::shared_ptr<const SuperpixelPartition> partition, const MaskingPolicy& policy,
                             const std::string& targetLabel, const EstimatorConfig& cfg) {
  if (cfg.sampler == Sampler::exact) {
    cfg.validate();
    return shapley_exact(predictor, image, std::move(partition), policy, targetLabel, cfg.batchSize);
  }
  return shapley_sampled(predictor, image, std::move(partition), policy, targetLabel, cfg);
}

std::vector<int> top_regions(std::span<const double> values, int k) {
  std::vector<int> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return values[a] > values[b]; });
  idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(std::max(k, 0))));
  return idx;
}

RoiPoints extract_roi(const AttributionMap& attribution, int k) {
  if (k < 1) throw InputError("extract_roi needs k >= 1");
  RoiPoints roi;
  roi.requested = k;
  roi.truncated = k > static_cast<int>(attribution.regionValues.size());
  for (int id : top_regions(attribution.regionValues, k)) {
    roi.regions.push_back(id);
    roi.values.push_back(attribution.regionValues[id]);
    roi.centroids.push_back(attribution.partition->centroids()[id]);
    roi.points.push_back(attribution.partition->representative_pixel(id));
  }
  return roi;
}

Image render_heatmap(const AttributionMap& attribution, const Image& image) {
  if (image.width() != attribution.width() || image.height() != attribution.height())
    throw InputError("heatmap image and attribution dimensions differ");
  Image gray = to_grayscale(image);
  double peak = 0.0;
  for (double v : attribution.regionValues) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) return to_rgb(gray);

  const std::size_t n = gray.pixel_count();
  std::vector<float> weight(n);
  for (std::size_t p = 0; p < n; ++p) weight[p] = static_cast<float>(attribution.pixelValues[p] / peak);
  std::vector<float> red(n), green(n), blue(n);
  simd::kernels().heatmap_blend(gray.data().data(), weight.data(), kHeatmapAlpha, red.data(), green.data(), blue.data(), n);
  std::vector<float> rgb(3 * n);
  for (std::size_t p = 0; p < n; ++p) {
    rgb[3 * p] = std::clamp(red[p], 0.0f, 1.0f);
    rgb[3 * p + 1] = std::clamp(green[p], 0.0f, 1.0f);
    rgb[3 * p + 2] = std::clamp(blue[p], 0.0f, 1.0f);
  }
  return Image(gray.width(), gray.height(), 3, std::move(rgb));
}

nlohmann::json to_json(const AttributionMap& attribution) {
  return {{"regionValues", attribution.regionValues},
          {"baseValue", attribution.baseValue},
          {"targetLabel", attribution.targetLabel},
          {"fullValue", attribution.fullValue},
          {"evaluations", attribution.evaluations}};
}

}  // namespace vale
