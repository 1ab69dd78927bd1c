#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>

#include "vale/image.hpp"
#include "vale/transport.hpp"

namespace vale {

/// SHA-256 (hex) over "<width>x<height>x<channels>\n" followed by the 8-bit
/// row-major channel-interleaved values, i.e. exactly what a service decodes
/// from the PNG payload.
std::string image_digest(const Image& image);

inline constexpr double kDefaultTemperature = 0.2;
inline constexpr int kDefaultMaxTokens = 1024;

struct CaptionRequest {
  Image image;
  std::string prompt;
  double temperature = kDefaultTemperature;
  int maxTokens = kDefaultMaxTokens;

  /// Throws InputError.
  void validate() const;
};

struct CaptionResponse {
  std::string text;
  std::string model;
  double latencyMs = 0.0;
};

class Captioner {
 public:
  virtual ~Captioner() = default;
  virtual CaptionResponse caption(const CaptionRequest& request) const = 0;
};

/// POST /caption with bounded exponential retry.
class RemoteCaptioner final : public Captioner {
 public:
  RemoteCaptioner(std::shared_ptr<const Transport> transport, RetryPolicy retry = {})
      : transport_(std::move(transport)), retry_(retry) {}
  CaptionResponse caption(const CaptionRequest& request) const override;

 private:
  std::shared_ptr<const Transport> transport_;
  RetryPolicy retry_;
};

/// Deterministic stand-in: canned captions keyed by (image digest, prompt),
/// otherwise a caption synthesized from the key alone.
class MockCaptioner final : public Captioner {
 public:
  explicit MockCaptioner(std::map<std::pair<std::string, std::string>, std::string> canned = {},
                         std::string model = "mock-vlm")
      : canned_(std::move(canned)), model_(std::move(model)) {}
  CaptionResponse caption(const CaptionRequest& request) const override;
  /// Loads a JSON list of {"digest","prompt","text"}.
  static MockCaptioner from_json(const std::string& text, std::string model = "mock-vlm");

 private:
  std::map<std::pair<std::string, std::string>, std::string> canned_;
  std::string model_;
};

CaptionResponse caption(const Transport& transport, const CaptionRequest& request, const RetryPolicy& retry = {});

// Wire format of POST /caption. top_p is never sent.
std::string encode_caption_request(const CaptionRequest& request);
CaptionResponse parse_caption_response(const std::string& body);
std::string encode_caption_response(const CaptionResponse& response);

}  // namespace vale
