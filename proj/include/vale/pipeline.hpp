#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "vale/bleu.hpp"
#include "vale/model_gateway.hpp"
#include "vale/partition.hpp"
#include "vale/prompt.hpp"
#include "vale/segment.hpp"
#include "vale/shap.hpp"
#include "vale/vlm.hpp"

namespace vale {

struct PartitionSettings {
  enum class Method { slic, grid };
  Method method = Method::slic;
  SlicOptions slic{};
  int gridRows = 4;
  int gridCols = 4;
};

struct SegmenterSettings {
  MaskSource source = MaskSource::builtin;
  std::string endpoint;  // source == remote
  double tolerance = 0.1;
  int timeoutMs = 30000;
};

struct CaptionSettings {
  enum class Mode { remote, mock };
  Mode mode = Mode::mock;
  std::string endpoint;  // mode == remote
  std::filesystem::path fixtures;  // optional canned captions for mode == mock
  double temperature = kDefaultTemperature;
  int maxTokens = kDefaultMaxTokens;
  int timeoutMs = 30000;
};

struct PipelineConfig {
  PredictorHandle predictor;
  std::string predictorEndpoint;  // as written; may be a mock endpoint
  PartitionSettings partition;
  MaskingPolicy masking = MaskingPolicy::blur(8);
  EstimatorConfig estimator;
  std::optional<std::uint64_t> seed;
  int roiK = 1;
  SegmenterSettings segmenter;
  std::string promptId = "default-imagenet";
  std::filesystem::path templates;   // optional user template file
  CaptionSettings caption;
  std::filesystem::path references;  // optional BLEU references
  std::filesystem::path outputDir;
  std::filesystem::path baseDir;     // relative paths resolve against this

  /// Throws ConfigError.
  void validate() const;
};

/// Parses the JSON config format. Relative paths (and mock endpoints)
/// resolve against `baseDir`. Throws ConfigError.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& baseDir = {});
/// Reads `path`, or the file named by VALE_CONFIG when `path` is empty.
PipelineConfig load_config(const std::filesystem::path& path);
/// Everything that influences results, excluding the output directory.
nlohmann::json config_snapshot(const PipelineConfig& config);

/// Stage names in execution order.
inline const std::vector<std::string> kStages = {"load", "classify", "attribute", "roi", "segment", "prompt", "caption"};

struct StageError {
  std::string stage;
  std::string kind;  // ErrorKind name, or "internal"
  std::string cause;
};

struct ExplanationRecord {
  std::string inputPath;
  std::uint64_t seed = 0;
  int workingWidth = 0, workingHeight = 0;
  TopLabel prediction;
  int regionCount = 0;
  std::vector<int> topRegions;
  std::vector<double> topValues;
  double baseValue = 0.0, fullValue = 0.0;
  long long evaluations = 0;
  RoiPoints roi;
  double maskConfidence = 0.0;
  MaskSource maskSource = MaskSource::builtin;
  int maskIndex = 0;
  std::size_t maskArea = 0;
  std::string promptId;
  std::string prompt;
  std::string caption;
  std::string captionModel;
  std::optional<BleuReport> bleu;
  std::map<std::string, std::string> artifacts;  // name -> file name inside the output dir
  std::vector<std::string> stages;               // completed, in order
  std::vector<std::pair<std::string, double>> timingsMs;
  double totalMs = 0.0;
  std::optional<StageError> error;
  nlohmann::json config;

  bool ok() const { return !error.has_value(); }
};

/// record.json content: deterministic (no timings).
nlohmann::json to_json(const ExplanationRecord& record);
nlohmann::json timings_json(const ExplanationRecord& record);

/// Model clients built once per config and shared by every run.
struct Services {
  std::unique_ptr<Predictor> predictor;
  std::shared_ptr<const Transport> segmentTransport;  // null for the builtin segmenter
  std::unique_ptr<Captioner> captioner;
  PromptRegistry prompts;
  std::optional<ReferenceStore> references;
};

Services make_services(const PipelineConfig& config);

/// Runs every stage, writing artifacts plus record.json and timings.json to
/// `outDir`. Stage failures are captured in the returned record; only an
/// unwritable output directory throws.
ExplanationRecord explain(const PipelineConfig& config, const Services& services, const std::filesystem::path& imagePath,
                          const std::filesystem::path& outDir);
ExplanationRecord explain(const PipelineConfig& config, const std::filesystem::path& imagePath,
                          const std::filesystem::path& outDir);

/// JSON list of paths or one path per line ('#' comments). Relative paths
/// resolve against the manifest directory. Throws InputError when unreadable
/// or empty.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path);

struct BatchItem {
  std::filesystem::path input;
  std::filesystem::path outputDir;
  std::optional<StageError> error;
  std::vector<std::pair<std::string, double>> timingsMs;
};

struct BatchSummary {
  std::vector<BatchItem> items;
  int success = 0;
  std::map<std::string, double> meanStageMs;  // over successful items
};

/// Explains every manifest entry into `outDir/<index>_<stem>` with up to
/// `jobs` items in flight, then writes `outDir/summary.json`.
BatchSummary batch(const PipelineConfig& config, const std::filesystem::path& manifest, const std::filesystem::path& outDir,
                   int jobs = 1);
nlohmann::json to_json(const BatchSummary& summary);

struct AblationRow {
  int maxEvaluations = 0;
  double meanRoiDistance = 0.0;   // pixels, vs the reference ROI
  double meanMaskIoU = 0.0;       // vs the reference mask
  double meanAbsError = 0.0;      // mean |phi - phi_ref|
  double roiAgreement = 0.0;      // fraction of seeds whose top regions match the reference
  long long evaluations = 0;      // per run
};

struct AblationTable {
  std::string targetLabel;
  int regionCount = 0;
  std::string reference;  // "exact" or "max-evaluations=<n>"
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;
};

/// Attribution + ROI + segmentation at every budget and seed, compared to
/// the exact estimator when M <= 12 and to the largest budget otherwise.
/// Writes ablation.json and ablation_grid.png (reference heatmap first, then
/// one heatmap per budget for the first seed) to `outDir`.
AblationTable ablate(const PipelineConfig& config, const std::filesystem::path& imagePath, std::vector<int> evalCounts,
                     std::vector<std::uint64_t> seeds, const std::filesystem::path& outDir);
nlohmann::json to_json(const AblationTable& table);

inline constexpr int kMaxExactReferencePlayers = 12;

/// RGB copy of `image` with a magenta cross at every point.
Image draw_roi(const Image& image, const std::vector<Pixel>& points, int radius = 4);

}  // namespace vale
