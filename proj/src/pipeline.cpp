#include "vale/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sstream>
#include <thread>

#include "vale/codec.hpp"
#include "vale/error.hpp"
#include "vale/mock_shim.hpp"

namespace vale {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Placeholder address for remote predictors served by a mock shim; it only
// has to pass endpoint validation, it is never dialed.
constexpr const char* kMockAddress = "http://mock.invalid";

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end())
      throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

PredictorHandle parse_predictor(const json& p, std::string& endpoint) {
  if (!p.is_object()) throw ConfigError("predictor must be an object");
  const auto kind = get_or<std::string>(p, "kind", "remote");
  if (kind == "remote") {
    reject_unknown(p, {"kind", "endpoint", "timeoutMs", "maxInFlight", "inputSize", "retryAttempts"}, "predictor");
    RemotePredictorConfig c;
    endpoint = get_or<std::string>(p, "endpoint", "");
    if (endpoint.empty()) throw ConfigError("remote predictor needs an endpoint");
    c.endpoint = is_mock_endpoint(endpoint) ? kMockAddress : endpoint;
    c.timeoutMs = get_or(p, "timeoutMs", c.timeoutMs);
    c.maxInFlight = get_or(p, "maxInFlight", c.maxInFlight);
    c.retry.attempts = get_or(p, "retryAttempts", c.retry.attempts);
    if (p.contains("inputSize")) {
      const auto size = get_or<std::vector<int>>(p, "inputSize", {});
      if (size.size() != 2) throw ConfigError("inputSize must be [width, height]");
      c.inputSize = InputSize{size[0], size[1]};
    }
    return {c};
  }
  if (kind == "toy-linear") {
    reject_unknown(p, {"kind", "labels", "weights", "bias", "gridRows", "gridCols"}, "predictor");
    ToyLinearConfig c;
    c.labels = get_or<std::vector<std::string>>(p, "labels", {});
    c.weights = get_or<std::vector<std::vector<double>>>(p, "weights", {});
    c.bias = get_or<std::vector<double>>(p, "bias", std::vector<double>(c.labels.size(), 0.0));
    c.gridRows = get_or(p, "gridRows", c.gridRows);
    c.gridCols = get_or(p, "gridCols", c.gridCols);
    return {c};
  }
  if (kind == "toy-patch") {
    reject_unknown(p, {"kind", "labels", "top", "left", "bottom", "right", "gain", "threshold"}, "predictor");
    ToyPatchConfig c;
    c.labels = get_or(p, "labels", c.labels);
    c.top = get_or(p, "top", c.top);
    c.left = get_or(p, "left", c.left);
    c.bottom = get_or(p, "bottom", c.bottom);
    c.right = get_or(p, "right", c.right);
    c.gain = get_or(p, "gain", c.gain);
    c.threshold = get_or(p, "threshold", c.threshold);
    return {c};
  }
  throw ConfigError("unknown predictor kind '" + kind + "'");
}

json predictor_json(const PipelineConfig& cfg) {
  return std::visit(
      [&](const auto& c) -> json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, RemotePredictorConfig>) {
          json j{{"kind", "remote"},
                 {"endpoint", cfg.predictorEndpoint},
                 {"timeoutMs", c.timeoutMs},
                 {"maxInFlight", c.maxInFlight},
                 {"retryAttempts", c.retry.attempts}};
          if (c.inputSize) j["inputSize"] = {c.inputSize->width, c.inputSize->height};
          return j;
        } else if constexpr (std::is_same_v<T, ToyLinearConfig>) {
          return {{"kind", "toy-linear"}, {"labels", c.labels},     {"weights", c.weights},
                  {"bias", c.bias},       {"gridRows", c.gridRows}, {"gridCols", c.gridCols}};
        } else {
          return {{"kind", "toy-patch"}, {"labels", c.labels}, {"top", c.top},   {"left", c.left},
                  {"bottom", c.bottom},  {"right", c.right},   {"gain", c.gain}, {"threshold", c.threshold}};
        }
      },
      cfg.predictor.config);
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

std::uint64_t draw_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

StageError stage_error(const std::string& stage, const std::exception& e) {
  if (const auto* ve = dynamic_cast<const Error*>(&e)) return {stage, to_string(ve->kind()), ve->what()};
  return {stage, "internal", e.what()};
}

Image load_working_image(const fs::path& path, const Predictor& predictor) {
  Image image = read_png(path);
  if (auto size = predictor.input_size()) image = resize_bilinear(image, size->width, size->height);
  return image;
}

std::shared_ptr<const SuperpixelPartition> make_partition(const Image& image, const PartitionSettings& s) {
  if (s.method == PartitionSettings::Method::grid)
    return std::make_shared<SuperpixelPartition>(partition_grid(image, s.gridRows, s.gridCols));
  return std::make_shared<SuperpixelPartition>(partition_slic(image, s.slic));
}

std::vector<MaskCandidate> run_segmenter(const PipelineConfig& cfg, const Services& services, const Image& image,
                                         const std::vector<Pixel>& points) {
  const auto prompt = PointPrompt::foreground_only(points);
  if (cfg.segmenter.source == MaskSource::remote) return segment_remote(*services.segmentTransport, image, prompt);
  return segment_builtin(image, prompt, cfg.segmenter.tolerance);
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

}  // namespace

void PipelineConfig::validate() const {
  predictor.validate();
  if (partition.method == PartitionSettings::Method::slic) {
    if (partition.slic.targetRegions < 2) throw ConfigError("partition.targetRegions must be >= 2");
    if (!(partition.slic.compactness >= 0.0)) throw ConfigError("partition.compactness must be >= 0");
    if (partition.slic.iterations < 1) throw ConfigError("partition.iterations must be >= 1");
  } else if (partition.gridRows < 1 || partition.gridCols < 1 || partition.gridRows * partition.gridCols < 2) {
    throw ConfigError("grid partition needs rows, cols >= 1 and at least 2 cells");
  }
  masking.validate();
  estimator.validate();
  if (roiK < 1) throw ConfigError("roiK must be >= 1");
  if (!(segmenter.tolerance > 0.0 && segmenter.tolerance <= 1.0)) throw ConfigError("segmenter.tolerance must lie in (0,1]");
  if (segmenter.source == MaskSource::remote && segmenter.endpoint.empty())
    throw ConfigError("remote segmenter needs an endpoint");
  if (segmenter.source == MaskSource::remote && !is_mock_endpoint(segmenter.endpoint)) Endpoint::parse(segmenter.endpoint);
  if (promptId.empty()) throw ConfigError("prompt id must be non-empty");
  if (caption.mode == CaptionSettings::Mode::remote) {
    if (caption.endpoint.empty()) throw ConfigError("remote caption mode needs an endpoint");
    if (!is_mock_endpoint(caption.endpoint)) Endpoint::parse(caption.endpoint);
  }
  if (!(caption.temperature >= 0.0)) throw ConfigError("caption.temperature must be >= 0");
  if (caption.maxTokens < 1) throw ConfigError("caption.maxTokens must be >= 1");
}

PipelineConfig parse_config(const std::string& text, const fs::path& baseDir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc,
                 {"predictor", "partition", "masking", "estimator", "seed", "roiK", "segmenter", "prompt", "caption",
                  "references", "outputDir"},
                 "config");

  PipelineConfig cfg;
  cfg.baseDir = baseDir;
  if (!doc.contains("predictor")) throw ConfigError("config needs a predictor");
  cfg.predictor = parse_predictor(doc["predictor"], cfg.predictorEndpoint);

  if (doc.contains("partition")) {
    const auto& p = doc["partition"];
    reject_unknown(p, {"method", "targetRegions", "compactness", "iterations", "rows", "cols"}, "partition");
    const auto method = get_or<std::string>(p, "method", "slic");
    if (method == "slic")
      cfg.partition.method = PartitionSettings::Method::slic;
    else if (method == "grid")
      cfg.partition.method = PartitionSettings::Method::grid;
    else
      throw ConfigError("unknown partition method '" + method + "'");
    cfg.partition.slic.targetRegions = get_or(p, "targetRegions", cfg.partition.slic.targetRegions);
    cfg.partition.slic.compactness = get_or(p, "compactness", cfg.partition.slic.compactness);
    cfg.partition.slic.iterations = get_or(p, "iterations", cfg.partition.slic.iterations);
    cfg.partition.gridRows = get_or(p, "rows", cfg.partition.gridRows);
    cfg.partition.gridCols = get_or(p, "cols", cfg.partition.gridCols);
  }
  if (doc.contains("masking")) {
    const auto& m = doc["masking"];
    reject_unknown(m, {"mode", "fillValue", "blurRadius"}, "masking");
    try {
      cfg.masking.mode = parse_masking_mode(get_or<std::string>(m, "mode", "blur"));
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    cfg.masking.fillValue = get_or(m, "fillValue", cfg.masking.fillValue);
    cfg.masking.blurRadius = get_or(m, "blurRadius", cfg.masking.blurRadius);
  }
  if (doc.contains("estimator")) {
    const auto& e = doc["estimator"];
    reject_unknown(e, {"sampler", "maxEvaluations", "batchSize"}, "estimator");
    try {
      cfg.estimator.sampler = parse_sampler(get_or<std::string>(e, "sampler", "permutation"));
    } catch (const Error& err) {
      throw ConfigError(err.what());
    }
    cfg.estimator.maxEvaluations = get_or(e, "maxEvaluations", cfg.estimator.maxEvaluations);
    cfg.estimator.batchSize = get_or(e, "batchSize", cfg.estimator.batchSize);
  }
  if (doc.contains("seed")) cfg.seed = get_or<std::uint64_t>(doc, "seed", 0);
  cfg.roiK = get_or(doc, "roiK", cfg.roiK);
  if (doc.contains("segmenter")) {
    const auto& s = doc["segmenter"];
    reject_unknown(s, {"source", "endpoint", "tolerance", "timeoutMs"}, "segmenter");
    const auto source = get_or<std::string>(s, "source", "builtin");
    if (source == "builtin")
      cfg.segmenter.source = MaskSource::builtin;
    else if (source == "remote")
      cfg.segmenter.source = MaskSource::remote;
    else
      throw ConfigError("unknown segmenter source '" + source + "'");
    cfg.segmenter.endpoint = get_or<std::string>(s, "endpoint", "");
    cfg.segmenter.tolerance = get_or(s, "tolerance", cfg.segmenter.tolerance);
    cfg.segmenter.timeoutMs = get_or(s, "timeoutMs", cfg.segmenter.timeoutMs);
  }
  if (doc.contains("prompt")) {
    const auto& p = doc["prompt"];
    reject_unknown(p, {"id", "templates"}, "prompt");
    cfg.promptId = get_or(p, "id", cfg.promptId);
    cfg.templates = resolve(baseDir, get_or<std::string>(p, "templates", ""));
  }
  if (doc.contains("caption")) {
    const auto& c = doc["caption"];
    reject_unknown(c, {"mode", "endpoint", "fixtures", "temperature", "maxTokens", "timeoutMs"}, "caption");
    const auto mode = get_or<std::string>(c, "mode", "mock");
    if (mode == "mock")
      cfg.caption.mode = CaptionSettings::Mode::mock;
    else if (mode == "remote")
      cfg.caption.mode = CaptionSettings::Mode::remote;
    else
      throw ConfigError("unknown caption mode '" + mode + "'");
    cfg.caption.endpoint = get_or<std::string>(c, "endpoint", "");
    cfg.caption.fixtures = resolve(baseDir, get_or<std::string>(c, "fixtures", ""));
    cfg.caption.temperature = get_or(c, "temperature", cfg.caption.temperature);
    cfg.caption.maxTokens = get_or(c, "maxTokens", cfg.caption.maxTokens);
    cfg.caption.timeoutMs = get_or(c, "timeoutMs", cfg.caption.timeoutMs);
  }
  cfg.references = resolve(baseDir, get_or<std::string>(doc, "references", ""));
  cfg.outputDir = resolve(baseDir, get_or<std::string>(doc, "outputDir", ""));
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  fs::path p = path;
  if (p.empty()) {
    const char* env = std::getenv("VALE_CONFIG");
    if (!env || !*env) throw ConfigError("no config given and VALE_CONFIG is unset");
    p = env;
  }
  Bytes bytes;
  try {
    bytes = read_file(p);
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(std::string(bytes.begin(), bytes.end()), p.parent_path());
}

json config_snapshot(const PipelineConfig& cfg) {
  json partition = cfg.partition.method == PartitionSettings::Method::slic
                       ? json{{"method", "slic"},
                              {"targetRegions", cfg.partition.slic.targetRegions},
                              {"compactness", cfg.partition.slic.compactness},
                              {"iterations", cfg.partition.slic.iterations}}
                       : json{{"method", "grid"}, {"rows", cfg.partition.gridRows}, {"cols", cfg.partition.gridCols}};
  json masking{{"mode", to_string(cfg.masking.mode)}};
  if (cfg.masking.mode == MaskingPolicy::Mode::fixed_color) masking["fillValue"] = cfg.masking.fillValue;
  if (cfg.masking.mode == MaskingPolicy::Mode::blur) masking["blurRadius"] = cfg.masking.blurRadius;
  json segmenter{{"source", to_string(cfg.segmenter.source)}, {"tolerance", cfg.segmenter.tolerance}};
  if (cfg.segmenter.source == MaskSource::remote) segmenter["endpoint"] = cfg.segmenter.endpoint;
  json caption{{"mode", cfg.caption.mode == CaptionSettings::Mode::mock ? "mock" : "remote"},
               {"temperature", cfg.caption.temperature},
               {"maxTokens", cfg.caption.maxTokens}};
  if (!cfg.caption.endpoint.empty()) caption["endpoint"] = cfg.caption.endpoint;
  json snap{{"predictor", predictor_json(cfg)},
            {"partition", partition},
            {"masking", masking},
            {"estimator",
             {{"sampler", to_string(cfg.estimator.sampler)},
              {"maxEvaluations", cfg.estimator.maxEvaluations},
              {"batchSize", cfg.estimator.batchSize}}},
            {"roiK", cfg.roiK},
            {"segmenter", segmenter},
            {"prompt", {{"id", cfg.promptId}}},
            {"caption", caption}};
  if (cfg.seed) snap["seed"] = *cfg.seed;
  return snap;
}

Services make_services(const PipelineConfig& cfg) {
  Services s;
  const auto* remote = std::get_if<RemotePredictorConfig>(&cfg.predictor.config);
  std::shared_ptr<const Transport> predictTransport;
  if (remote)
    predictTransport = make_transport(cfg.predictorEndpoint, std::chrono::milliseconds(remote->timeoutMs), cfg.baseDir);
  s.predictor = make_predictor(cfg.predictor, predictTransport);
  if (cfg.segmenter.source == MaskSource::remote)
    s.segmentTransport =
        make_transport(cfg.segmenter.endpoint, std::chrono::milliseconds(cfg.segmenter.timeoutMs), cfg.baseDir);
  if (cfg.caption.mode == CaptionSettings::Mode::remote) {
    s.captioner = std::make_unique<RemoteCaptioner>(
        make_transport(cfg.caption.endpoint, std::chrono::milliseconds(cfg.caption.timeoutMs), cfg.baseDir));
  } else if (!cfg.caption.fixtures.empty()) {
    Bytes bytes;
    try {
      bytes = read_file(cfg.caption.fixtures);
    } catch (const InputError& e) {
      throw ConfigError(e.what());
    }
    s.captioner = std::make_unique<MockCaptioner>(MockCaptioner::from_json(std::string(bytes.begin(), bytes.end())));
  } else {
    s.captioner = std::make_unique<MockCaptioner>();
  }
  if (!cfg.templates.empty()) {
    try {
      s.prompts.load_file(cfg.templates);
    } catch (const InputError& e) {
      throw ConfigError(e.what());
    }
  }
  if (!s.prompts.contains(cfg.promptId)) throw ConfigError("unknown prompt id '" + cfg.promptId + "'");
  if (!cfg.references.empty()) {
    const auto bytes = read_file(cfg.references);
    s.references = ReferenceStore::from_json(std::string(bytes.begin(), bytes.end()));
  }
  return s;
}

Image draw_roi(const Image& image, const std::vector<Pixel>& points, int radius) {
  Image out = to_rgb(image);
  auto paint = [&](int r, int c) {
    if (!out.contains({r, c})) return;
    out.at(r, c, 0) = 1.0f;
    out.at(r, c, 1) = 0.0f;
    out.at(r, c, 2) = 1.0f;
  };
  for (const auto& p : points)
    for (int d = -radius; d <= radius; ++d) {
      paint(p.row + d, p.col);
      paint(p.row, p.col + d);
    }
  return out;
}

ExplanationRecord explain(const PipelineConfig& cfg, const Services& services, const fs::path& imagePath,
                          const fs::path& outDir) {
  const auto wallStart = std::chrono::steady_clock::now();
  std::error_code ec;
  fs::create_directories(outDir, ec);
  if (ec || !fs::is_directory(outDir)) throw InputError("cannot create output directory " + outDir.string());

  ExplanationRecord rec;
  rec.inputPath = imagePath.string();
  rec.seed = cfg.seed ? *cfg.seed : draw_seed();
  rec.promptId = cfg.promptId;
  rec.config = config_snapshot(cfg);
  rec.config["seed"] = rec.seed;

  Image working;
  std::shared_ptr<const SuperpixelPartition> partition;
  AttributionMap attribution;
  SegmentedObject segmented;

  auto artifact = [&](const std::string& name, const std::string& file, const Bytes& bytes) {
    write_file(outDir / file, bytes);
    rec.artifacts[name] = file;
  };

  auto stage = [&](const std::string& name, auto&& body) {
    if (rec.error) return;
    const auto start = std::chrono::steady_clock::now();
    try {
      body();
      rec.stages.push_back(name);
    } catch (const std::exception& e) {
      rec.error = stage_error(name, e);
    }
    rec.timingsMs.emplace_back(name, elapsed_ms(start));
  };

  stage("load", [&] {
    working = load_working_image(imagePath, *services.predictor);
    rec.workingWidth = working.width();
    rec.workingHeight = working.height();
  });
  stage("classify", [&] {
    const auto preds = services.predictor->predict(std::span<const Image>(&working, 1));
    rec.prediction = top_label(preds.at(0));
  });
  stage("attribute", [&] {
    partition = make_partition(working, cfg.partition);
    EstimatorConfig est = cfg.estimator;
    est.seed = rec.seed;
    attribution = explain_image(*services.predictor, working, partition, cfg.masking, rec.prediction.label, est);
    rec.regionCount = partition->region_count();
    rec.topRegions = top_regions(attribution.regionValues, std::min(std::max(5, cfg.roiK), rec.regionCount));
    for (int r : rec.topRegions) rec.topValues.push_back(attribution.regionValues[r]);
    rec.baseValue = attribution.baseValue;
    rec.fullValue = attribution.fullValue;
    rec.evaluations = attribution.evaluations;
    artifact("heatmap", "heatmap.png", encode_png(render_heatmap(attribution, working)));
  });
  stage("roi", [&] {
    rec.roi = extract_roi(attribution, cfg.roiK);
    artifact("roi", "roi.png", encode_png(draw_roi(working, rec.roi.points)));
  });
  stage("segment", [&] {
    segmented = select_best(run_segmenter(cfg, services, working, rec.roi.points), working, cfg.segmenter.source);
    rec.maskConfidence = segmented.mask.confidence;
    rec.maskSource = segmented.source;
    rec.maskIndex = segmented.candidateIndex;
    rec.maskArea = segmented.mask.mask.area();
    artifact("mask", "mask.png", encode_mask_png(segmented.mask.mask));
    artifact("segmented", "segmented.png", encode_png(segmented.image));
  });
  stage("prompt", [&] { rec.prompt = render(services.prompts.get(cfg.promptId), rec.prediction.label).rendered; });
  stage("caption", [&] {
    CaptionRequest req{segmented.image, rec.prompt, cfg.caption.temperature, cfg.caption.maxTokens};
    const auto res = services.captioner->caption(req);
    rec.caption = res.text;
    rec.captionModel = res.model;
    if (services.references) {
      // Score against every reference annotated with the predicted class.
      std::vector<Tokens> refs;
      for (const auto& id : services.references->ids()) {
        const auto* ref = services.references->find(id);
        if (ref->className == rec.prediction.label) refs.push_back(tokenize(ref->text));
      }
      if (!refs.empty()) rec.bleu = bleu(tokenize(rec.caption), refs);
    }
  });

  write_json(outDir / "record.json", to_json(rec));
  rec.totalMs = elapsed_ms(wallStart);
  write_json(outDir / "timings.json", timings_json(rec));
  return rec;
}

ExplanationRecord explain(const PipelineConfig& cfg, const fs::path& imagePath, const fs::path& outDir) {
  const auto services = make_services(cfg);
  return explain(cfg, services, imagePath, outDir);
}

json to_json(const ExplanationRecord& rec) {
  json doc{{"inputPath", rec.inputPath}, {"seed", rec.seed}, {"stages", rec.stages}};
  doc["status"] = rec.ok() ? "ok" : "error";
  auto done = [&](const char* s) { return std::find(rec.stages.begin(), rec.stages.end(), s) != rec.stages.end(); };
  if (done("load")) doc["workingSize"] = {rec.workingWidth, rec.workingHeight};
  if (done("classify"))
    doc["prediction"] = {{"label", rec.prediction.label}, {"probability", rec.prediction.probability}};
  if (done("attribute")) {
    json top = json::array();
    for (std::size_t i = 0; i < rec.topRegions.size(); ++i)
      top.push_back({{"region", rec.topRegions[i]}, {"value", rec.topValues[i]}});
    doc["attribution"] = {{"regionCount", rec.regionCount},
                          {"topRegions", top},
                          {"baseValue", rec.baseValue},
                          {"fullValue", rec.fullValue},
                          {"evaluations", rec.evaluations}};
  }
  if (done("roi")) {
    json points = json::array(), centroids = json::array();
    for (const auto& p : rec.roi.points) points.push_back({p.row, p.col});
    for (const auto& c : rec.roi.centroids) centroids.push_back({c.row, c.col});
    doc["roi"] = {{"points", points},   {"centroids", centroids},          {"regions", rec.roi.regions},
                  {"values", rec.roi.values}, {"requested", rec.roi.requested}, {"truncated", rec.roi.truncated}};
  }
  if (done("segment"))
    doc["segmentation"] = {{"source", to_string(rec.maskSource)},
                           {"confidence", rec.maskConfidence},
                           {"candidateIndex", rec.maskIndex},
                           {"area", rec.maskArea}};
  if (done("prompt")) doc["prompt"] = {{"id", rec.promptId}, {"text", rec.prompt}};
  if (done("caption")) {
    doc["caption"] = {{"text", rec.caption}, {"model", rec.captionModel}};
    if (rec.bleu) doc["bleu"] = to_json(*rec.bleu);
  }
  doc["artifacts"] = rec.artifacts;
  if (rec.error) doc["error"] = {{"stage", rec.error->stage}, {"kind", rec.error->kind}, {"cause", rec.error->cause}};
  doc["config"] = rec.config;
  return doc;
}

json timings_json(const ExplanationRecord& rec) {
  json stages = json::array();
  for (const auto& [name, ms] : rec.timingsMs) stages.push_back({{"stage", name}, {"ms", ms}});
  return {{"stages", stages}, {"totalMs", rec.totalMs}};
}

std::vector<fs::path> read_manifest(const fs::path& path) {
  Bytes bytes = read_file(path);
  const std::string text(bytes.begin(), bytes.end());
  const fs::path base = path.parent_path();
  std::vector<fs::path> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw InputError("manifest " + path.string() + " is not valid JSON: " + e.what());
    }
    for (const auto& e : doc) {
      if (!e.is_string()) throw InputError("manifest entries must be strings");
      out.push_back(resolve(base, e.get<std::string>()));
    }
  } else {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const auto b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos || line[b] == '#') continue;
      const auto e = line.find_last_not_of(" \t\r");
      out.push_back(resolve(base, line.substr(b, e - b + 1)));
    }
  }
  if (out.empty()) throw InputError("manifest " + path.string() + " lists no images");
  return out;
}

BatchSummary batch(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& outDir, int jobs) {
  if (jobs < 1) throw ConfigError("--jobs must be >= 1");
  const auto inputs = read_manifest(manifest);
  const auto services = make_services(cfg);
  std::error_code ec;
  fs::create_directories(outDir, ec);
  if (ec || !fs::is_directory(outDir)) throw InputError("cannot create output directory " + outDir.string());

  BatchSummary summary;
  summary.items.resize(inputs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < inputs.size();) {
      auto& item = summary.items[i];
      item.input = inputs[i];
      char prefix[16];
      std::snprintf(prefix, sizeof prefix, "%03zu_", i);
      item.outputDir = outDir / (prefix + inputs[i].stem().string());
      try {
        auto rec = explain(cfg, services, inputs[i], item.outputDir);
        item.error = rec.error;
        item.timingsMs = rec.timingsMs;
      } catch (const std::exception& e) {
        item.error = stage_error("load", e);
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const int n = std::min<int>(jobs, static_cast<int>(inputs.size()));
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  }

  std::map<std::string, int> counts;
  for (const auto& item : summary.items) {
    if (item.error) continue;
    ++summary.success;
    for (const auto& [stage, ms] : item.timingsMs) {
      summary.meanStageMs[stage] += ms;
      ++counts[stage];
    }
  }
  for (auto& [stage, ms] : summary.meanStageMs) ms /= counts[stage];
  write_json(outDir / "summary.json", to_json(summary));
  return summary;
}

json to_json(const BatchSummary& summary) {
  json items = json::array();
  for (const auto& item : summary.items) {
    json j{{"input", item.input.string()}, {"outputDir", item.outputDir.string()}, {"status", item.error ? "error" : "ok"}};
    if (item.error) j["error"] = {{"stage", item.error->stage}, {"kind", item.error->kind}, {"cause", item.error->cause}};
    items.push_back(j);
  }
  return {{"total", summary.items.size()},
          {"success", summary.success},
          {"failed", static_cast<int>(summary.items.size()) - summary.success},
          {"meanStageMs", summary.meanStageMs},
          {"items", items}};
}

namespace {

double roi_distance(const std::vector<Pixel>& a, const std::vector<Pixel>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::hypot(a[i].row - b[i].row, a[i].col - b[i].col);
  return a.empty() ? 0.0 : sum / static_cast<double>(a.size());
}

Image hconcat(const std::vector<Image>& tiles, int gap) {
  int width = 0, height = 0;
  for (const auto& t : tiles) {
    width += t.width();
    height = std::max(height, t.height());
  }
  width += gap * static_cast<int>(tiles.size() - 1);
  Image out(width, height, 3, 1.0f);
  int x = 0;
  for (const auto& t : tiles) {
    const Image rgb = to_rgb(t);
    for (int r = 0; r < rgb.height(); ++r)
      for (int c = 0; c < rgb.width(); ++c)
        for (int k = 0; k < 3; ++k) out.at(r, x + c, k) = rgb.at(r, c, k);
    x += t.width() + gap;
  }
  return out;
}

}  // namespace

AblationTable ablate(const PipelineConfig& cfg, const fs::path& imagePath, std::vector<int> evalCounts,
                     std::vector<std::uint64_t> seeds, const fs::path& outDir) {
  if (evalCounts.empty()) throw InputError("ablation needs at least one evaluation budget");
  if (seeds.empty()) seeds.push_back(cfg.seed.value_or(0));
  const auto services = make_services(cfg);
  std::error_code ec;
  fs::create_directories(outDir, ec);
  if (ec || !fs::is_directory(outDir)) throw InputError("cannot create output directory " + outDir.string());

  const Image working = load_working_image(imagePath, *services.predictor);
  const auto label = top_label(services.predictor->predict(std::span<const Image>(&working, 1)).at(0)).label;
  const auto partition = make_partition(working, cfg.partition);
  const int m = partition->region_count();
  for (int count : evalCounts) {
    EstimatorConfig est = cfg.estimator;
    est.sampler = Sampler::permutation;
    est.maxEvaluations = count;
    est.validate(m);
  }

  const CoalitionMasker masker(working, *partition, cfg.masking);
  const ImageGame game(*services.predictor, masker, label);

  AblationTable table;
  table.targetLabel = label;
  table.regionCount = m;
  table.seeds = seeds;

  EstimatorConfig base = cfg.estimator;
  base.sampler = Sampler::permutation;
  ShapleyValues reference;
  if (m <= kMaxExactReferencePlayers) {
    reference = exact_shapley(game, base.batchSize);
    table.reference = "exact";
  } else {
    base.maxEvaluations = *std::max_element(evalCounts.begin(), evalCounts.end());
    base.seed = seeds.front();
    reference = sampled_shapley(game, base);
    table.reference = "max-evaluations=" + std::to_string(base.maxEvaluations);
  }

  auto roi_of = [&](const ShapleyValues& v) { return extract_roi(make_attribution_map(partition, v, label), cfg.roiK); };
  auto mask_of = [&](const RoiPoints& roi) {
    return select_best(run_segmenter(cfg, services, working, roi.points), working, cfg.segmenter.source).mask.mask;
  };
  const auto refRoi = roi_of(reference);
  const auto refMask = mask_of(refRoi);

  std::vector<Image> tiles{render_heatmap(make_attribution_map(partition, reference, label), working)};
  for (int count : evalCounts) {
    AblationRow row;
    row.maxEvaluations = count;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      EstimatorConfig est = base;
      est.maxEvaluations = count;
      est.seed = seeds[s];
      const auto values = sampled_shapley(game, est);
      const auto roi = roi_of(values);
      row.meanRoiDistance += roi_distance(roi.points, refRoi.points);
      row.meanMaskIoU += intersection_over_union(mask_of(roi), refMask);
      double err = 0.0;
      for (int i = 0; i < m; ++i) err += std::abs(values.values[i] - reference.values[i]);
      row.meanAbsError += err / m;
      row.roiAgreement += roi.regions == refRoi.regions ? 1.0 : 0.0;
      row.evaluations = values.evaluations;
      if (s == 0) tiles.push_back(render_heatmap(make_attribution_map(partition, values, label), working));
    }
    const double n = static_cast<double>(seeds.size());
    row.meanRoiDistance /= n;
    row.meanMaskIoU /= n;
    row.meanAbsError /= n;
    row.roiAgreement /= n;
    table.rows.push_back(row);
  }
  write_json(outDir / "ablation.json", to_json(table));
  write_file(outDir / "ablation_grid.png", encode_png(hconcat(tiles, 4)));
  return table;
}

json to_json(const AblationTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows)
    rows.push_back({{"maxEvaluations", r.maxEvaluations},
                    {"evaluations", r.evaluations},
                    {"meanRoiDistance", r.meanRoiDistance},
                    {"meanMaskIoU", r.meanMaskIoU},
                    {"meanAbsError", r.meanAbsError},
                    {"roiAgreement", r.roiAgreement}});
  return {{"targetLabel", table.targetLabel},
          {"regionCount", table.regionCount},
          {"reference", table.reference},
          {"seeds", table.seeds},
          {"rows", rows}};
}

}  // namespace vale
