#include "vale/model_gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <nlohmann/json.hpp>
#include <set>
#include <thread>

#include "vale/codec.hpp"
#include "vale/error.hpp"

namespace vale {

using nlohmann::json;

void ClassPrediction::validate() const {
  if (labels.empty()) throw ProtocolError("prediction has no labels");
  if (labels.size() != probabilities.size()) throw ProtocolError("labels and probabilities differ in length");
  std::set<std::string> seen;
  for (const auto& l : labels)
    if (!seen.insert(l).second) throw ProtocolError("duplicate label '" + l + "'");
  double sum = 0.0;
  for (double p : probabilities) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) throw ProtocolError("probability outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ProtocolError("probabilities do not sum to 1");
}

int ClassPrediction::index_of(const std::string& label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

double ClassPrediction::probability_of(const std::string& label) const {
  int i = index_of(label);
  if (i < 0) throw InputError("label '" + label + "' not in prediction");
  return probabilities[i];
}

TopLabel top_label(const ClassPrediction& prediction) {
  TopLabel top{prediction.labels.at(0), prediction.probabilities.at(0), 0};
  for (std::size_t i = 1; i < prediction.probabilities.size(); ++i)
    if (prediction.probabilities[i] > top.probability)
      top = {prediction.labels[i], prediction.probabilities[i], static_cast<int>(i)};
  return top;
}

namespace {

void check_batch(std::span<const Image> images) {
  if (images.empty()) throw InputError("predict needs a non-empty batch");
  for (const auto& img : images) {
    if (img.empty()) throw InputError("empty image in batch");
    if (img.width() != images[0].width() || img.height() != images[0].height())
      throw InputError("images in a batch must share dimensions");
  }
}

void check_labels(const std::vector<std::string>& labels) {
  if (labels.empty()) throw ConfigError("predictor needs at least one label");
  std::set<std::string> seen(labels.begin(), labels.end());
  if (seen.size() != labels.size()) throw ConfigError("predictor labels must be unique");
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (out[i] = std::exp(logits[i] - peak));
  for (double& v : out) v /= sum;
  return out;
}

double mean_intensity(const Image& img, int r0, int r1, int c0, int c1) {
  double sum = 0.0;
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) sum += img.intensity(r, c);
  return sum / (static_cast<double>(r1 - r0) * (c1 - c0));
}

void validate(const ToyLinearConfig& cfg) {
  check_labels(cfg.labels);
  if (cfg.gridRows < 1 || cfg.gridCols < 1) throw ConfigError("toy-linear grid must be at least 1x1");
  const std::size_t features = static_cast<std::size_t>(cfg.gridRows) * cfg.gridCols;
  if (cfg.weights.size() != cfg.labels.size()) throw ConfigError("toy-linear needs one weight row per label");
  for (const auto& row : cfg.weights)
    if (row.size() != features) throw ConfigError("toy-linear weight row length must equal rows*cols");
  if (cfg.bias.size() != cfg.labels.size()) throw ConfigError("toy-linear needs one bias per label");
}

void validate(const ToyPatchConfig& cfg) {
  if (cfg.labels.size() != 2) throw ConfigError("toy-patch needs exactly two labels");
  check_labels(cfg.labels);
  if (!(0.0 <= cfg.top && cfg.top < cfg.bottom && cfg.bottom <= 1.0 && 0.0 <= cfg.left && cfg.left < cfg.right &&
        cfg.right <= 1.0))
    throw ConfigError("toy-patch block must be a non-empty sub-rectangle of [0,1]^2");
  if (!std::isfinite(cfg.gain) || !std::isfinite(cfg.threshold)) throw ConfigError("toy-patch gain/threshold must be finite");
}

void validate(const RemotePredictorConfig& cfg) {
  Endpoint::parse(cfg.endpoint);
  if (cfg.timeoutMs < 1) throw ConfigError("remote timeout must be positive");
  if (cfg.maxInFlight < 1) throw ConfigError("max in-flight requests must be >= 1");
  if (cfg.retry.attempts < 1) throw ConfigError("retry attempts must be >= 1");
  if (cfg.inputSize && (cfg.inputSize->width < 1 || cfg.inputSize->height < 1))
    throw ConfigError("declared input size must be positive");
}

class ToyLinearPredictor final : public Predictor {
 public:
  explicit ToyLinearPredictor(ToyLinearConfig cfg) : cfg_(std::move(cfg)) { validate(cfg_); }

  std::vector<ClassPrediction> predict(std::span<const Image> images) const override {
    check_batch(images);
    if (images[0].height() < cfg_.gridRows || images[0].width() < cfg_.gridCols)
      throw InputError("image smaller than the toy-linear feature grid");
    std::vector<ClassPrediction> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(predict_one(img));
    return out;
  }

 private:
  ClassPrediction predict_one(const Image& img) const {
    std::vector<double> features;
    for (int gr = 0; gr < cfg_.gridRows; ++gr)
      for (int gc = 0; gc < cfg_.gridCols; ++gc) {
        auto span = [](int length, int parts, int i) {
          const int base = length / parts, extra = length % parts;
          const int start = i * base + std::min(i, extra);
          return std::pair{start, start + base + (i < extra ? 1 : 0)};
        };
        auto [r0, r1] = span(img.height(), cfg_.gridRows, gr);
        auto [c0, c1] = span(img.width(), cfg_.gridCols, gc);
        features.push_back(mean_intensity(img, r0, r1, c0, c1));
      }
    std::vector<double> logits(cfg_.labels.size());
    for (std::size_t k = 0; k < logits.size(); ++k) {
      double z = cfg_.bias[k];
      for (std::size_t f = 0; f < features.size(); ++f) z += cfg_.weights[k][f] * features[f];
      logits[k] = z;
    }
    return {cfg_.labels, softmax(logits)};
  }

  ToyLinearConfig cfg_;
};

class ToyPatchPredictor final : public Predictor {
 public:
  explicit ToyPatchPredictor(ToyPatchConfig cfg) : cfg_(std::move(cfg)) { validate(cfg_); }

  std::vector<ClassPrediction> predict(std::span<const Image> images) const override {
    check_batch(images);
    std::vector<ClassPrediction> out;
    out.reserve(images.size());
    for (const auto& img : images) {
      const int r0 = static_cast<int>(std::floor(cfg_.top * img.height()));
      const int c0 = static_cast<int>(std::floor(cfg_.left * img.width()));
      const int r1 = std::max(r0 + 1, static_cast<int>(std::ceil(cfg_.bottom * img.height())));
      const int c1 = std::max(c0 + 1, static_cast<int>(std::ceil(cfg_.right * img.width())));
      const double m = mean_intensity(img, r0, std::min(r1, img.height()), c0, std::min(c1, img.width()));
      const double p = 1.0 / (1.0 + std::exp(-cfg_.gain * (m - cfg_.threshold)));
      out.push_back({cfg_.labels, {1.0 - p, p}});
    }
    return out;
  }

 private:
  ToyPatchConfig cfg_;
};

class RemotePredictor final : public Predictor {
 public:
  RemotePredictor(RemotePredictorConfig cfg, std::shared_ptr<const Transport> transport)
      : cfg_(std::move(cfg)), transport_(std::move(transport)) {
    validate(cfg_);
    if (!transport_)
      transport_ = std::make_shared<HttpTransport>(Endpoint::parse(cfg_.endpoint), std::chrono::milliseconds(cfg_.timeoutMs));
  }

  std::optional<InputSize> input_size() const override { return cfg_.inputSize; }

  std::vector<ClassPrediction> predict(std::span<const Image> images) const override {
    check_batch(images);
    if (cfg_.inputSize && (images[0].width() != cfg_.inputSize->width || images[0].height() != cfg_.inputSize->height))
      throw InputError("image dimensions do not match the predictor's declared input size");

    std::vector<ClassPrediction> out(images.size());
    std::vector<std::exception_ptr> errors(images.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < images.size(); i = next++) {
        try {
          out[i] = parse_predict_response(
              post_with_retry(*transport_, "/predict", encode_predict_request(images[i]), cfg_.retry));
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(cfg_.maxInFlight), images.size());
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    return out;
  }

 private:
  RemotePredictorConfig cfg_;
  std::shared_ptr<const Transport> transport_;
};

}  // namespace

std::string PredictorHandle::kind() const {
  switch (config.index()) {
    case 0: return "remote";
    case 1: return "toy-linear";
    default: return "toy-patch";
  }
}

void PredictorHandle::validate() const {
  std::visit([](const auto& cfg) { vale::validate(cfg); }, config);
}

std::unique_ptr<Predictor> make_toy_linear(ToyLinearConfig config) {
  return std::make_unique<ToyLinearPredictor>(std::move(config));
}

std::unique_ptr<Predictor> make_toy_patch(ToyPatchConfig config) {
  return std::make_unique<ToyPatchPredictor>(std::move(config));
}

std::unique_ptr<Predictor> make_remote(RemotePredictorConfig config, std::shared_ptr<const Transport> transport) {
  return std::make_unique<RemotePredictor>(std::move(config), std::move(transport));
}

std::unique_ptr<Predictor> make_predictor(const PredictorHandle& handle, std::shared_ptr<const Transport> transport) {
  struct Visitor {
    std::shared_ptr<const Transport>& transport;
    std::unique_ptr<Predictor> operator()(const RemotePredictorConfig& c) { return make_remote(c, transport); }
    std::unique_ptr<Predictor> operator()(const ToyLinearConfig& c) { return make_toy_linear(c); }
    std::unique_ptr<Predictor> operator()(const ToyPatchConfig& c) { return make_toy_patch(c); }
  };
  return std::visit(Visitor{transport}, handle.config);
}

std::vector<ClassPrediction> predict(const Predictor& predictor, std::span<const Image> images) {
  return predictor.predict(images);
}

std::string encode_predict_request(const Image& image) {
  return json{{"image", base64_encode(encode_png(image))}}.dump();
}

ClassPrediction parse_predict_response(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("/predict response is not JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ProtocolError("/predict response must be an object");
  if (!doc.contains("labels") || !doc["labels"].is_array()) throw ProtocolError("/predict response lacks a labels array");
  if (!doc.contains("probabilities") || !doc["probabilities"].is_array())
    throw ProtocolError("/predict response lacks a probabilities array");
  ClassPrediction pred;
  for (const auto& l : doc["labels"]) {
    if (!l.is_string()) throw ProtocolError("/predict label is not a string");
    pred.labels.push_back(l.get<std::string>());
  }
  for (const auto& p : doc["probabilities"]) {
    if (!p.is_number()) throw ProtocolError("/predict probability is not a number");
    pred.probabilities.push_back(p.get<double>());
  }
  if (pred.labels.empty()) throw ProtocolError("/predict response has no labels");
  if (pred.labels.size() != pred.probabilities.size()) throw ProtocolError("/predict labels and probabilities differ in length");
  double sum = 0.0;
  for (double p : pred.probabilities) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) throw ProtocolError("/predict probability outside [0,1]");
    sum += p;
  }
  if (!(std::abs(sum - 1.0) < 1e-3)) throw ProtocolError("/predict probabilities sum to " + std::to_string(sum));
  for (double& p : pred.probabilities) p = std::min(1.0, p / sum);
  pred.validate();
  return pred;
}

std::string encode_predict_response(const ClassPrediction& prediction) {
  return json{{"labels", prediction.labels}, {"probabilities", prediction.probabilities}}.dump();
}

}  // namespace vale
