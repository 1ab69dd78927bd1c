// vale: explain classifier predictions, run batches and ablations, score captions.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "vale/bleu.hpp"
#include "vale/codec.hpp"
#include "vale/error.hpp"
#include "vale/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

// Exit codes: 0 success, 1 a stage or item failed, 2 bad usage or config.
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

struct Overrides {
  std::string config;
  std::optional<std::string> promptId;
  std::optional<int> roiK;
  std::optional<std::uint64_t> seed;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Pipeline config (defaults to $VALE_CONFIG)");
  cmd->add_option("--prompt-id", o.promptId, "Prompt template id");
  cmd->add_option("--roi-k", o.roiK, "Number of ROI points");
  cmd->add_option("--seed", o.seed, "Random seed");
}

vale::PipelineConfig resolve_config(const Overrides& o) {
  auto cfg = vale::load_config(o.config);
  if (o.promptId) cfg.promptId = *o.promptId;
  if (o.roiK) cfg.roiK = *o.roiK;
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

fs::path output_dir(const std::string& flag, const vale::PipelineConfig& cfg) {
  if (!flag.empty()) return flag;
  if (!cfg.outputDir.empty()) return cfg.outputDir;
  throw vale::ConfigError("no output directory: pass --out or set outputDir in the config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visual and textual explanations for image classifiers"};
  app.require_subcommand(1);

  Overrides explainOpts;
  std::string image, out;
  auto* explainCmd = app.add_subcommand("explain", "Explain one image");
  explainCmd->add_option("--image", image, "Input PNG")->required();
  explainCmd->add_option("--out", out, "Output directory");
  add_overrides(explainCmd, explainOpts);

  Overrides batchOpts;
  std::string manifest, batchOut;
  int jobs = 1;
  auto* batchCmd = app.add_subcommand("batch", "Explain every image of a manifest");
  batchCmd->add_option("--manifest", manifest, "JSON list or one path per line")->required();
  batchCmd->add_option("--out", batchOut, "Output directory");
  batchCmd->add_option("--jobs", jobs, "Images processed concurrently")->check(CLI::PositiveNumber);
  add_overrides(batchCmd, batchOpts);

  Overrides ablateOpts;
  std::string ablateImage, ablateOut;
  std::vector<int> maxEvals{100, 200, 300, 500, 1000};
  std::vector<std::uint64_t> seeds;
  auto* ablateCmd = app.add_subcommand("ablate", "Sweep the evaluation budget of the sampler");
  ablateCmd->add_option("--image", ablateImage, "Input PNG")->required();
  ablateCmd->add_option("--max-evals", maxEvals, "Comma-separated budgets")->delimiter(',');
  ablateCmd->add_option("--seeds", seeds, "Comma-separated seeds")->delimiter(',');
  ablateCmd->add_option("--out", ablateOut, "Output directory");
  add_overrides(ablateCmd, ablateOpts);

  std::string refs, hyps, report;
  int maxOrder = 4;
  auto* evalCmd = app.add_subcommand("evaluate", "BLEU of hypotheses against references");
  evalCmd->add_option("--refs", refs, "References JSON")->required();
  evalCmd->add_option("--hyps", hyps, "Hypotheses JSON")->required();
  evalCmd->add_option("--out", report, "Report JSON path");
  evalCmd->add_option("--max-order", maxOrder, "Largest n-gram order")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*explainCmd) {
      const auto cfg = resolve_config(explainOpts);
      const auto dir = output_dir(out, cfg);
      const auto rec = vale::explain(cfg, image, dir);
      if (!rec.ok()) {
        std::cerr << "vale: " << rec.error->stage << " failed (" << rec.error->kind << "): " << rec.error->cause << "\n";
        return kExitFailed;
      }
      std::cout << "label: " << rec.prediction.label << " (" << rec.prediction.probability << ")\n"
                << "prompt: " << rec.prompt << "\n"
                << "mask confidence: " << rec.maskConfidence << "\n"
                << "caption: " << rec.caption << "\n"
                << "record: " << (dir / "record.json").string() << "\n";
      return 0;
    }
    if (*batchCmd) {
      const auto cfg = resolve_config(batchOpts);
      const auto dir = output_dir(batchOut, cfg);
      const auto summary = vale::batch(cfg, manifest, dir, jobs);
      std::cout << summary.success << "/" << summary.items.size() << " images explained; summary: "
                << (dir / "summary.json").string() << "\n";
      for (const auto& item : summary.items)
        if (item.error) std::cerr << "vale: " << item.input.string() << ": " << item.error->stage << ": " << item.error->cause << "\n";
      return summary.success == static_cast<int>(summary.items.size()) ? 0 : kExitFailed;
    }
    if (*ablateCmd) {
      const auto cfg = resolve_config(ablateOpts);
      const auto dir = output_dir(ablateOut, cfg);
      const auto table = vale::ablate(cfg, ablateImage, maxEvals, seeds, dir);
      std::cout << "label " << table.targetLabel << ", " << table.regionCount << " regions, reference " << table.reference
                << "\n";
      std::printf("%10s %12s %10s %10s %10s\n", "maxEvals", "roiDistance", "maskIoU", "MAE", "roiAgree");
      for (const auto& r : table.rows)
        std::printf("%10d %12.3f %10.4f %10.6f %10.2f\n", r.maxEvaluations, r.meanRoiDistance, r.meanMaskIoU,
                    r.meanAbsError, r.roiAgreement);
      return 0;
    }
    if (*evalCmd) {
      const auto refBytes = vale::read_file(refs);
      const auto hypBytes = vale::read_file(hyps);
      const auto store = vale::ReferenceStore::from_json(std::string(refBytes.begin(), refBytes.end()));
      const auto records = vale::parse_hypotheses(std::string(hypBytes.begin(), hypBytes.end()));
      const auto eval = vale::evaluate_prompts(records, store, maxOrder);
      if (!report.empty()) vale::write_text(report, vale::to_json(eval).dump(2) + "\n");
      std::cout << vale::format_table(eval);
      return eval.errors.empty() ? 0 : kExitFailed;
    }
  } catch (const vale::ConfigError& e) {
    std::cerr << "vale: config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const vale::Error& e) {
    std::cerr << "vale: " << vale::to_string(e.kind()) << " error: " << e.what() << "\n";
    return kExitFailed;
  }
  return 0;
}
