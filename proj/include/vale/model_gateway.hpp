#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vale/image.hpp"
#include "vale/transport.hpp"

namespace vale {

struct ClassPrediction {
  std::vector<std::string> labels;
  std::vector<double> probabilities;

  /// Throws ProtocolError unless labels are non-empty and unique, lengths
  /// match, every probability is in [0,1] and they sum to 1 within 1e-6.
  void validate() const;
  /// Index of `label`, or -1.
  int index_of(const std::string& label) const;
  double probability_of(const std::string& label) const;
};

struct TopLabel {
  std::string label;
  double probability = 0.0;
  int index = 0;
};

/// Highest probability; ties go to the lowest index.
TopLabel top_label(const ClassPrediction& prediction);

struct InputSize {
  int width = 0;
  int height = 0;
};

/// An image classifier f. Implementations are immutable and may be shared
/// across threads.
class Predictor {
 public:
  virtual ~Predictor() = default;
  /// One prediction per image, in order. All images must share dimensions.
  virtual std::vector<ClassPrediction> predict(std::span<const Image> images) const = 0;
  /// Resolution the model expects, if it declares one.
  virtual std::optional<InputSize> input_size() const { return std::nullopt; }
};

/// Softmax over W * features + b, where the features are the mean intensities
/// of a rows x cols grid of the image (row-major cell order).
struct ToyLinearConfig {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> weights;  // labels x (rows*cols)
  std::vector<double> bias;                  // labels
  int gridRows = 1;
  int gridCols = 2;
};

/// Two-class detector that fires on a bright block:
/// p(positive) = sigmoid(gain * (mean intensity inside the block - threshold)).
/// The block is given in fractions of the image extent.
struct ToyPatchConfig {
  std::vector<std::string> labels{"background", "patch"};
  double top = 0.25, left = 0.25, bottom = 0.5, right = 0.5;
  double gain = 12.0;
  double threshold = 0.5;
};

struct RemotePredictorConfig {
  std::string endpoint;  // http://host:port
  int timeoutMs = 30000;
  int maxInFlight = 4;
  std::optional<InputSize> inputSize;
  RetryPolicy retry{};
};

struct PredictorHandle {
  std::variant<RemotePredictorConfig, ToyLinearConfig, ToyPatchConfig> config;

  std::string kind() const;
  /// Throws ConfigError for invalid parameters (including a bad endpoint).
  void validate() const;
};

std::unique_ptr<Predictor> make_toy_linear(ToyLinearConfig config);
std::unique_ptr<Predictor> make_toy_patch(ToyPatchConfig config);
/// `transport` overrides the HTTP client built from the endpoint.
std::unique_ptr<Predictor> make_remote(RemotePredictorConfig config, std::shared_ptr<const Transport> transport = nullptr);
std::unique_ptr<Predictor> make_predictor(const PredictorHandle& handle, std::shared_ptr<const Transport> transport = nullptr);

/// Convenience wrapper around Predictor::predict.
std::vector<ClassPrediction> predict(const Predictor& predictor, std::span<const Image> images);

// Wire format of POST /predict.
std::string encode_predict_request(const Image& image);
/// Parses and validates a /predict body. Sums off by less than 1e-3 are
/// renormalized; anything else malformed throws ProtocolError.
ClassPrediction parse_predict_response(const std::string& body);
std::string encode_predict_response(const ClassPrediction& prediction);

}  // namespace vale
