#include "vale/vlm.hpp"

#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>

#include "vale/codec.hpp"
#include "vale/error.hpp"

namespace vale {

using nlohmann::json;

std::string image_digest(const Image& image) {
  const std::string header =
      std::to_string(image.width()) + "x" + std::to_string(image.height()) + "x" + std::to_string(image.channels()) + "\n";
  Bytes bytes(header.begin(), header.end());
  const auto pixels = image.to_bytes();
  bytes.insert(bytes.end(), pixels.begin(), pixels.end());
  return sha256_hex(bytes);
}

void CaptionRequest::validate() const {
  if (image.empty()) throw InputError("caption request needs an image");
  if (prompt.empty()) throw InputError("caption request needs a prompt");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw InputError("temperature must be finite and >= 0");
  if (maxTokens < 1) throw InputError("maxTokens must be >= 1");
}

std::string encode_caption_request(const CaptionRequest& request) {
  return json{{"image", base64_encode(encode_png(request.image))},
              {"prompt", request.prompt},
              {"temperature", request.temperature},
              {"max_tokens", request.maxTokens}}
      .dump();
}

CaptionResponse parse_caption_response(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("/caption response is not JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ProtocolError("/caption response must be an object");
  if (!doc.contains("text") || !doc["text"].is_string()) throw ProtocolError("/caption response lacks a text string");
  if (!doc.contains("model") || !doc["model"].is_string()) throw ProtocolError("/caption response lacks a model string");
  CaptionResponse res{doc["text"].get<std::string>(), doc["model"].get<std::string>(), 0.0};
  if (res.text.empty()) throw ProtocolError("/caption returned empty text");
  return res;
}

std::string encode_caption_response(const CaptionResponse& response) {
  return json{{"text", response.text}, {"model", response.model}}.dump();
}

CaptionResponse caption(const Transport& transport, const CaptionRequest& request, const RetryPolicy& retry) {
  request.validate();
  const auto start = std::chrono::steady_clock::now();
  auto res = parse_caption_response(post_with_retry(transport, "/caption", encode_caption_request(request), retry));
  res.latencyMs = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return res;
}

CaptionResponse RemoteCaptioner::caption(const CaptionRequest& request) const {
  return vale::caption(*transport_, request, retry_);
}

CaptionResponse MockCaptioner::caption(const CaptionRequest& request) const {
  request.validate();
  const auto digest = image_digest(request.image);
  if (auto it = canned_.find({digest, request.prompt}); it != canned_.end()) return {it->second, model_, 0.0};
  return {"Mock description of image " + digest.substr(0, 12) + " for the instruction: " + request.prompt, model_, 0.0};
}

MockCaptioner MockCaptioner::from_json(const std::string& text, std::string model) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("caption fixture file is not JSON: ") + e.what());
  }
  if (!doc.is_array()) throw InputError("caption fixture file must be a JSON list");
  std::map<std::pair<std::string, std::string>, std::string> canned;
  for (const auto& e : doc) {
    if (!e.is_object() || !e.value("digest", json()).is_string() || !e.value("prompt", json()).is_string() ||
        !e.value("text", json()).is_string())
      throw InputError("caption fixtures need string fields digest, prompt and text");
    canned[{e["digest"].get<std::string>(), e["prompt"].get<std::string>()}] = e["text"].get<std::string>();
  }
  return MockCaptioner(std::move(canned), std::move(model));
}

}  // namespace vale
