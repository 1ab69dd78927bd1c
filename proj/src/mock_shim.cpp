#include "vale/mock_shim.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "vale/codec.hpp"
#include "vale/error.hpp"

namespace vale {

using nlohmann::json;

ClassPrediction MockPredictFallback::predict(const Image& image) const {
  const int r0 = static_cast<int>(std::floor(top * image.height()));
  const int r1 = std::max(r0 + 1, static_cast<int>(std::ceil(bottom * image.height())));
  const int c0 = static_cast<int>(std::floor(left * image.width()));
  const int c1 = std::max(c0 + 1, static_cast<int>(std::ceil(right * image.width())));
  double sum = 0.0;
  std::size_t n = 0;
  for (int r = r0; r < std::min(r1, image.height()); ++r)
    for (int c = c0; c < std::min(c1, image.width()); ++c, ++n) sum += image.intensity(r, c);
  const double mean = n ? sum / static_cast<double>(n) : 0.0;
  const double p = 1.0 / (1.0 + std::exp(-gain * (mean - threshold)));
  ClassPrediction out;
  out.labels = labels;
  const double rest = labels.size() > 1 ? (1.0 - p) / static_cast<double>(labels.size() - 1) : 0.0;
  for (const auto& l : labels) out.probabilities.push_back(l == positive ? p : rest);
  return out;
}

void MockShim::add_prediction(const std::string& digest, ClassPrediction prediction) {
  prediction.validate();
  predictions_[digest] = std::move(prediction);
}

void MockShim::set_predict_fallback(MockPredictFallback fallback) {
  if (fallback.labels.empty() || std::find(fallback.labels.begin(), fallback.labels.end(), fallback.positive) ==
                                     fallback.labels.end())
    throw ConfigError("mock predict fallback must list its positive label");
  fallback_ = std::move(fallback);
}

void MockShim::add_segmentation(const std::string& digest, std::vector<MaskCandidate> candidates) {
  segmentations_[digest] = std::move(candidates);
}

void MockShim::add_caption(const std::string& digest, const std::string& prompt, std::string text, std::string model) {
  captions_[{digest, prompt}] = CaptionResponse{std::move(text), std::move(model), 0.0};
}

namespace {

HttpResponse bad_request(const std::string& why) { return {400, json{{"error", why}}.dump()}; }

HttpResponse unknown_key(const std::string& digest) {
  return {404, json{{"error", "unknown fixture key"}, {"digest", digest}}.dump()};
}

// Parses the body and decodes its "image" field; failures land in `error`.
bool request_image(const std::string& body, json& doc, Image& image, std::string& error) {
  try {
    doc = json::parse(body);
    if (!doc.is_object() || !doc.contains("image") || !doc["image"].is_string()) {
      error = "request lacks an image";
      return false;
    }
    image = decode_png(base64_decode(doc["image"].get<std::string>()));
    return true;
  } catch (const std::exception& e) {
    error = e.what();
    return false;
  }
}

}  // namespace

HttpResponse MockShim::handle_predict(const std::string& body) const {
  json doc;
  Image image;
  std::string error;
  if (!request_image(body, doc, image, error)) return bad_request(error);
  const auto digest = image_digest(image);
  if (auto it = predictions_.find(digest); it != predictions_.end()) return {200, encode_predict_response(it->second)};
  if (fallback_) return {200, encode_predict_response(fallback_->predict(image))};
  return unknown_key(digest);
}

HttpResponse MockShim::handle_segment(const std::string& body) const {
  json doc;
  Image image;
  std::string error;
  if (!request_image(body, doc, image, error)) return bad_request(error);
  if (!doc.contains("points") || !doc["points"].is_array() || doc["points"].empty()) return bad_request("no points");
  const auto digest = image_digest(image);
  auto it = segmentations_.find(digest);
  if (it == segmentations_.end()) return unknown_key(digest);
  return {200, encode_segment_response(it->second)};
}

HttpResponse MockShim::handle_caption(const std::string& body) const {
  json doc;
  Image image;
  std::string error;
  if (!request_image(body, doc, image, error)) return bad_request(error);
  if (!doc.contains("prompt") || !doc["prompt"].is_string()) return bad_request("request lacks a prompt");
  const auto digest = image_digest(image);
  auto it = captions_.find({digest, doc["prompt"].get<std::string>()});
  if (it == captions_.end()) return unknown_key(digest);
  return {200, encode_caption_response(it->second)};
}

std::shared_ptr<MockShim> MockShim::from_json(const std::string& text) {
  auto shim = std::make_shared<MockShim>();
  try {
    const json doc = json::parse(text);
    if (doc.contains("predict")) {
      const auto& p = doc["predict"];
      for (const auto& e : p.value("canned", json::array()))
        shim->add_prediction(e.at("digest").get<std::string>(),
                             {e.at("labels").get<std::vector<std::string>>(),
                              e.at("probabilities").get<std::vector<double>>()});
      if (p.contains("fallback")) {
        const auto& f = p["fallback"];
        MockPredictFallback fb;
        fb.labels = f.at("labels").get<std::vector<std::string>>();
        fb.positive = f.at("positive").get<std::string>();
        fb.top = f.value("top", fb.top);
        fb.left = f.value("left", fb.left);
        fb.bottom = f.value("bottom", fb.bottom);
        fb.right = f.value("right", fb.right);
        fb.gain = f.value("gain", fb.gain);
        fb.threshold = f.value("threshold", fb.threshold);
        shim->set_predict_fallback(std::move(fb));
      }
    }
    for (const auto& e : doc.value("segment", json::array())) {
      std::vector<MaskCandidate> masks;
      for (const auto& m : e.at("masks"))
        masks.push_back(
            {decode_mask_png(base64_decode(m.at("png").get<std::string>())), m.at("confidence").get<double>()});
      shim->add_segmentation(e.at("digest").get<std::string>(), std::move(masks));
    }
    for (const auto& e : doc.value("caption", json::array()))
      shim->add_caption(e.at("digest").get<std::string>(), e.at("prompt").get<std::string>(),
                        e.at("text").get<std::string>(), e.value("model", std::string("mock-vlm")));
  } catch (const Error& e) {
    throw ConfigError(std::string("mock fixture: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("mock fixture: ") + e.what());
  }
  return shim;
}

std::shared_ptr<MockShim> MockShim::load(const std::filesystem::path& dir) {
  const auto bytes = read_file(dir / "shim.json");
  return from_json(std::string(bytes.begin(), bytes.end()));
}

std::string MockShim::to_json() const {
  json canned = json::array();
  for (const auto& [digest, p] : predictions_)
    canned.push_back({{"digest", digest}, {"labels", p.labels}, {"probabilities", p.probabilities}});
  json predict{{"canned", canned}};
  if (fallback_)
    predict["fallback"] = {{"labels", fallback_->labels}, {"positive", fallback_->positive}, {"top", fallback_->top},
                           {"left", fallback_->left},     {"bottom", fallback_->bottom},     {"right", fallback_->right},
                           {"gain", fallback_->gain},     {"threshold", fallback_->threshold}};
  json segment = json::array();
  for (const auto& [digest, masks] : segmentations_) {
    json ms = json::array();
    for (const auto& m : masks) ms.push_back({{"png", base64_encode(encode_mask_png(m.mask))}, {"confidence", m.confidence}});
    segment.push_back({{"digest", digest}, {"masks", ms}});
  }
  json caption = json::array();
  for (const auto& [key, c] : captions_)
    caption.push_back({{"digest", key.first}, {"prompt", key.second}, {"text", c.text}, {"model", c.model}});
  return json{{"predict", predict}, {"segment", segment}, {"caption", caption}}.dump(2) + "\n";
}

std::shared_ptr<const Transport> MockShim::transport() const {
  auto t = std::make_shared<InProcessTransport>();
  // Handlers own a copy so the transport may outlive this shim.
  auto self = std::make_shared<MockShim>(*this);
  t->route("/predict", [self](const std::string& b) { return self->handle_predict(b); });
  t->route("/segment", [self](const std::string& b) { return self->handle_segment(b); });
  t->route("/caption", [self](const std::string& b) { return self->handle_caption(b); });
  return t;
}

bool is_mock_endpoint(const std::string& endpoint) { return endpoint.rfind(kMockScheme, 0) == 0; }

std::shared_ptr<const Transport> make_transport(const std::string& endpoint, std::chrono::milliseconds timeout,
                                                const std::filesystem::path& base) {
  if (is_mock_endpoint(endpoint)) {
    std::filesystem::path dir = endpoint.substr(kMockScheme.size());
    if (dir.is_relative() && !base.empty()) dir = base / dir;
    return MockShim::load(dir)->transport();
  }
  return std::make_shared<HttpTransport>(Endpoint::parse(endpoint), timeout);
}

}  // namespace vale
