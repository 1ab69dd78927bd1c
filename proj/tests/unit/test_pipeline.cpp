#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <nlohmann/json.hpp>

#include "vale/codec.hpp"
#include "vale/error.hpp"
#include "vale/mock_shim.hpp"
#include "vale/pipeline.hpp"

using namespace vale;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vale_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// 64x64 gray image with a bright square in the toy-patch block.
Image patch_image(float inside) {
  Image img(64, 64, 1);
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) img.at(r, c, 0) = (r >= 16 && r < 32 && c >= 16 && c < 32) ? inside : 0.1f;
  return img;
}

const char* kToyConfig = R"({
  "predictor": {"kind": "toy-patch", "labels": ["background", "patch"]},
  "partition": {"method": "grid", "rows": 4, "cols": 4},
  "masking": {"mode": "fixed-color", "fillValue": 0.0},
  "estimator": {"sampler": "exact"},
  "seed": 3,
  "segmenter": {"source": "builtin"},
  "caption": {"mode": "mock"}
})";

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config(kToyConfig);
  CHECK(cfg.predictor.kind() == "toy-patch");
  CHECK(cfg.partition.method == PartitionSettings::Method::grid);
  CHECK(cfg.seed == 3u);
  CHECK(cfg.promptId == "default-imagenet");
  CHECK(config_snapshot(cfg)["estimator"]["sampler"] == "exact");

  CHECK_THROWS_AS(parse_config("{}"), ConfigError);
  CHECK_THROWS_AS(parse_config("not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"predictor": {"kind": "toy-patch"}, "colour": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"predictor": {"kind": "oracle"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"predictor": {"kind": "remote", "endpoint": "ftp://x"}})").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"predictor": {"kind": "toy-patch"}, "roiK": 0})").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"predictor": {"kind": "toy-patch"}, "masking": {"mode": "smudge"}})"), ConfigError);
  CHECK_THROWS_AS(make_services(parse_config(R"({"predictor": {"kind": "toy-patch"}, "prompt": {"id": "nope"}})")),
                  ConfigError);
}

TEST_CASE("config falls back to VALE_CONFIG") {
  const auto dir = scratch("env");
  write_text(dir / "c.json", kToyConfig);
  ::setenv("VALE_CONFIG", (dir / "c.json").c_str(), 1);
  CHECK(load_config("").seed == 3u);
  ::unsetenv("VALE_CONFIG");
  CHECK_THROWS_AS(load_config(""), ConfigError);
}

TEST_CASE("explain with toy predictor and builtin segmenter") {
  const auto dir = scratch("toy");
  write_file(dir / "in.png", encode_png(patch_image(0.9f)));
  const auto cfg = parse_config(kToyConfig);
  const auto rec = explain(cfg, dir / "in.png", dir / "out");
  REQUIRE(rec.ok());
  CHECK(rec.stages == kStages);
  CHECK(rec.prediction.label == "patch");
  CHECK(rec.regionCount == 16);
  CHECK(rec.topRegions[0] == 5);  // grid cell (1,1) holds the block
  CHECK(rec.roi.regions[0] == 5);
  CHECK(rec.prompt.find("patch") != std::string::npos);
  CHECK(rec.maskArea == 256);
  for (const char* f : {"record.json", "timings.json", "heatmap.png", "roi.png", "mask.png", "segmented.png"})
    CHECK(fs::exists(dir / "out" / f));
  const auto doc = json::parse(read_text(dir / "out" / "record.json"));
  CHECK(doc["status"] == "ok");
  CHECK(doc["config"]["seed"] == 3);
  CHECK_FALSE(doc.contains("timings"));
}

TEST_CASE("flat attribution puts the ROI at the centroid of region 0") {
  const auto dir = scratch("zero");
  write_file(dir / "in.png", encode_png(Image(64, 64, 1)));
  const auto rec = explain(parse_config(kToyConfig), dir / "in.png", dir / "out");
  REQUIRE(rec.ok());
  REQUIRE(rec.roi.points.size() == 1);
  CHECK(rec.roi.regions[0] == 0);
  CHECK(rec.roi.centroids[0].row == doctest::Approx(7.5));
  CHECK(rec.roi.centroids[0].col == doctest::Approx(7.5));
}

TEST_CASE("caption transport failure is recorded in the caption stage") {
  const auto dir = scratch("unreachable");
  write_file(dir / "in.png", encode_png(patch_image(0.9f)));
  auto doc = json::parse(kToyConfig);
  doc["caption"] = {{"mode", "remote"}, {"endpoint", "http://127.0.0.1:1"}, {"timeoutMs", 500}};
  const auto rec = explain(parse_config(doc.dump()), dir / "in.png", dir / "out");
  REQUIRE(rec.error.has_value());
  CHECK(rec.error->stage == "caption");
  CHECK(rec.error->kind == "transport");
  CHECK(rec.stages.size() == 6);
  CHECK(json::parse(read_text(dir / "out" / "record.json"))["error"]["stage"] == "caption");
}

TEST_CASE("missing input fails the load stage") {
  const auto dir = scratch("missing");
  const auto rec = explain(parse_config(kToyConfig), dir / "nope.png", dir / "out");
  REQUIRE(rec.error.has_value());
  CHECK(rec.error->stage == "load");
  CHECK(rec.stages.empty());
}

TEST_CASE("batch") {
  const auto dir = scratch("batch");
  for (int i = 0; i < 3; ++i) write_file(dir / ("img" + std::to_string(i) + ".png"), encode_png(patch_image(0.5f + 0.2f * i)));
  write_text(dir / "good.txt", "# three images\nimg0.png\nimg1.png\n\nimg2.png\n");
  write_text(dir / "bad.json", R"(["img0.png", "ghost.png", "img2.png"])");
  write_text(dir / "empty.txt", "# nothing\n\n");
  const auto cfg = parse_config(kToyConfig);

  const auto good = batch(cfg, dir / "good.txt", dir / "out_good", 2);
  CHECK(good.success == 3);
  CHECK(fs::exists(dir / "out_good" / "summary.json"));
  CHECK(fs::exists(dir / "out_good" / "000_img0" / "record.json"));
  CHECK(good.meanStageMs.count("attribute") == 1);

  const auto bad = batch(cfg, dir / "bad.json", dir / "out_bad", 3);
  CHECK(bad.success == 2);
  REQUIRE(bad.items[1].error.has_value());
  CHECK(bad.items[1].error->stage == "load");
  const auto summary = json::parse(read_text(dir / "out_bad" / "summary.json"));
  CHECK(summary["total"] == 3);
  CHECK(summary["failed"] == 1);

  CHECK_THROWS_AS(batch(cfg, dir / "empty.txt", dir / "out_empty"), InputError);
  CHECK_THROWS_AS(batch(cfg, dir / "good.txt", dir / "out_zero", 0), ConfigError);
}

TEST_CASE("ablation against the exact reference") {
  const auto dir = scratch("ablate");
  write_file(dir / "in.png", encode_png(patch_image(0.9f)));
  auto doc = json::parse(kToyConfig);
  doc["partition"] = {{"method", "grid"}, {"rows", 3}, {"cols", 4}};
  doc["estimator"] = {{"sampler", "permutation"}, {"maxEvaluations", 200}};
  const auto table = ablate(parse_config(doc.dump()), dir / "in.png", {200}, {1, 2}, dir / "out");
  CHECK(table.reference == "exact");
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0].maxEvaluations == 200);
  CHECK(table.rows[0].roiAgreement == 1.0);
  CHECK(table.rows[0].meanRoiDistance == 0.0);
  CHECK(fs::exists(dir / "out" / "ablation.json"));
  const auto grid = decode_png(read_file(dir / "out" / "ablation_grid.png"));
  CHECK(grid.width() == 2 * 64 + 4);
}

TEST_CASE("mock shim reports unknown images") {
  MockShim shim;
  const auto t = shim.transport();
  const auto res = t->post("/predict", encode_predict_request(patch_image(0.3f)));
  CHECK(res.status == 404);
  CHECK(res.body.find(image_digest(patch_image(0.3f))) != std::string::npos);
}

TEST_CASE("ablation ROI drift shrinks with the budget") {
  const auto dir = scratch("ablate_drift");
  // Bright block off the grid lines, so several cells share the evidence.
  Image img(64, 48, 1, 0.2f);
  for (int r = 10; r < 27; ++r)
    for (int c = 10; c < 29; ++c) img.at(r, c) = 0.9f;
  write_file(dir / "in.png", encode_png(img));
  auto doc = json::parse(kToyConfig);
  doc["predictor"] = {{"kind", "toy-patch"}, {"top", 0.2}, {"bottom", 0.55}, {"left", 0.15}, {"right", 0.45},
                      {"threshold", 0.4}};
  doc["partition"] = {{"method", "grid"}, {"rows", 3}, {"cols", 4}};
  doc["estimator"] = {{"sampler", "permutation"}, {"maxEvaluations", 1000}};
  std::vector<std::uint64_t> seeds(20);
  std::iota(seeds.begin(), seeds.end(), 1);
  const auto table = ablate(parse_config(doc.dump()), dir / "in.png", {100, 1000}, seeds, dir / "out");
  CHECK(table.reference == "exact");
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[1].meanRoiDistance <= table.rows[0].meanRoiDistance);
  CHECK(table.rows[1].meanAbsError <= table.rows[0].meanAbsError);
  CHECK_THROWS_AS(ablate(parse_config(doc.dump()), dir / "in.png", {13}, seeds, dir / "out"), ConfigError);
}
