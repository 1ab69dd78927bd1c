#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <string_view>
#include <string>
#include <vector>

#include "vale/image.hpp"
#include "vale/model_gateway.hpp"
#include "vale/partition.hpp"

namespace vale {

/// Cooperative game over `players()` players. values() must be deterministic
/// and may be called with batches of any size.
class CoalitionGame {
 public:
  virtual ~CoalitionGame() = default;
  virtual int players() const = 0;
  virtual std::vector<double> values(std::span<const Coalition> coalitions) const = 0;
};

/// Wraps a plain value function; used for synthetic games.
class FunctionGame final : public CoalitionGame {
 public:
  FunctionGame(int players, std::function<double(const Coalition&)> value)
      : players_(players), value_(std::move(value)) {}
  int players() const override { return players_; }
  std::vector<double> values(std::span<const Coalition> coalitions) const override;

 private:
  int players_;
  std::function<double(const Coalition&)> value_;
};

/// v(S) = probability of `targetLabel` on the image with every region outside
/// S masked.
class ImageGame final : public CoalitionGame {
 public:
  ImageGame(const Predictor& predictor, const CoalitionMasker& masker, std::string targetLabel)
      : predictor_(predictor), masker_(masker), targetLabel_(std::move(targetLabel)) {}
  int players() const override { return masker_.partition().region_count(); }
  std::vector<double> values(std::span<const Coalition> coalitions) const override;

 private:
  const Predictor& predictor_;
  const CoalitionMasker& masker_;
  std::string targetLabel_;
};

enum class Sampler { exact, permutation };

const char* to_string(Sampler sampler);
Sampler parse_sampler(std::string_view name);

struct EstimatorConfig {
  int maxEvaluations = 1000;
  int batchSize = 50;
  Sampler sampler = Sampler::permutation;
  std::uint64_t seed = 0;

  /// Throws ConfigError. `players` enables the maxEvaluations >= M+2 check.
  void validate(int players = 0) const;
};

/// Largest player count accepted by the exact estimator (2^M evaluations).
inline constexpr int kMaxExactPlayers = 20;

struct ShapleyValues {
  std::vector<double> values;
  double baseValue = 0.0;  // v(empty)
  double fullValue = 0.0;  // v(all players)
  long long evaluations = 0;
  int permutations = 0;  // walks used by the sampler, 0 for exact
};

/// phi_i = sum over S not containing i of |S|!(M-|S|-1)!/M! [v(S+i) - v(S)],
/// evaluated over all 2^M coalitions in batches. Throws CapacityError when
/// M > kMaxExactPlayers.
ShapleyValues exact_shapley(const CoalitionGame& game, int batchSize = 50);

/// Permutation sampling with antithetic pairs: every sampled ordering is
/// walked forwards and reversed. v(empty) and v(full) are evaluated once and
/// shared, so each walk costs M-1 evaluations and a pair 2(M-1). When the
/// budget cannot cover a pair a single forward walk is used. Any residual of
/// the efficiency identity is spread over players in proportion to |phi_i|.
ShapleyValues sampled_shapley(const CoalitionGame& game, const EstimatorConfig& cfg);

/// Per-region and broadcast per-pixel attributions for one class.
struct AttributionMap {
  std::shared_ptr<const SuperpixelPartition> partition;
  std::vector<double> regionValues;
  std::vector<double> pixelValues;  // regionValues[label(p)]
  std::string targetLabel;
  double baseValue = 0.0;
  double fullValue = 0.0;
  long long evaluations = 0;

  int width() const { return partition->width(); }
  int height() const { return partition->height(); }
};

AttributionMap make_attribution_map(std::shared_ptr<const SuperpixelPartition> partition, const ShapleyValues& values,
                                    std::string targetLabel);

AttributionMap shapley_exact(const Predictor& predictor, const Image& image,
                             std::shared_ptr<const SuperpixelPartition> partition, const MaskingPolicy& policy,
                             const std::string& targetLabel, int batchSize = 50);
AttributionMap shapley_sampled(const Predictor& predictor, const Image& image,
                               std::shared_ptr<const SuperpixelPartition> partition, const MaskingPolicy& policy,
                               const std::string& targetLabel, const EstimatorConfig& cfg);
/// Dispatches on cfg.sampler.
AttributionMap explain_image(const Predictor& predictor, const Image& image,
                             std::shared_ptr<const SuperpixelPartition> partition, const MaskingPolicy& policy,
                             const std::string& targetLabel, const EstimatorConfig& cfg);

/// Indices of the k largest values, descending; ties go to the lower index.
std::vector<int> top_regions(std::span<const double> values, int k);

struct RoiPoints {
  std::vector<Pixel> points;         // representative pixel per region
  std::vector<Centroid> centroids;   // exact region centroids
  std::vector<int> regions;
  std::vector<double> values;
  int requested = 0;
  bool truncated = false;  // requested > region count
};

/// Prompt points for the segmenter: the k highest-attribution regions.
/// Throws InputError for k < 1.
RoiPoints extract_roi(const AttributionMap& attribution, int k);

/// Diverging red/blue overlay (normalized by max|phi|) alpha-blended at 0.6
/// over a grayscale copy; all-zero attributions give the plain grayscale.
Image render_heatmap(const AttributionMap& attribution, const Image& image);

inline constexpr float kHeatmapAlpha = 0.6f;

nlohmann::json to_json(const AttributionMap& attribution);

}  // namespace vale
