#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vale/model_gateway.hpp"
#include "vale/segment.hpp"
#include "vale/transport.hpp"
#include "vale/vlm.hpp"

namespace vale {

/// Analytic /predict answer for images without a canned entry: the
/// `positive` label gets sigmoid(gain * (block mean - threshold)) and the
/// remaining mass is split evenly over the other labels.
struct MockPredictFallback {
  std::vector<std::string> labels;
  std::string positive;
  double top = 0.25, left = 0.25, bottom = 0.5, right = 0.5;
  double gain = 12.0;
  double threshold = 0.5;

  ClassPrediction predict(const Image& image) const;
};

/// Deterministic in-process stand-in for the model service. Responses are
/// pure functions of the endpoint and the digest of the decoded request
/// image (plus the prompt for /caption). Unknown keys answer 404 with the
/// digest echoed, except /predict when a fallback is configured.
class MockShim {
 public:
  void add_prediction(const std::string& digest, ClassPrediction prediction);
  void set_predict_fallback(MockPredictFallback fallback);
  void add_segmentation(const std::string& digest, std::vector<MaskCandidate> candidates);
  void add_caption(const std::string& digest, const std::string& prompt, std::string text, std::string model);

  HttpResponse handle_predict(const std::string& body) const;
  HttpResponse handle_segment(const std::string& body) const;
  HttpResponse handle_caption(const std::string& body) const;

  /// Reads `<dir>/shim.json`. Throws ConfigError on a malformed fixture.
  static std::shared_ptr<MockShim> load(const std::filesystem::path& dir);
  static std::shared_ptr<MockShim> from_json(const std::string& text);
  std::string to_json() const;

  /// Transport routing /predict, /segment and /caption to this shim.
  std::shared_ptr<const Transport> transport() const;

 private:
  std::map<std::string, ClassPrediction> predictions_;
  std::optional<MockPredictFallback> fallback_;
  std::map<std::string, std::vector<MaskCandidate>> segmentations_;
  std::map<std::pair<std::string, std::string>, CaptionResponse> captions_;
};

/// Endpoint strings of the form "mock:<fixture dir>" select a MockShim.
inline constexpr std::string_view kMockScheme = "mock:";
bool is_mock_endpoint(const std::string& endpoint);

/// HttpTransport for http URLs, MockShim transport for mock endpoints
/// (relative fixture dirs resolve against `base`).
std::shared_ptr<const Transport> make_transport(const std::string& endpoint, std::chrono::milliseconds timeout,
                                                const std::filesystem::path& base = {});

}  // namespace vale
