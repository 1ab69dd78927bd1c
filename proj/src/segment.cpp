#include "vale/segment.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "vale/codec.hpp"
#include "vale/error.hpp"

namespace vale {

using nlohmann::json;

PointPrompt PointPrompt::foreground_only(std::vector<Pixel> points) {
  PointPrompt p;
  p.foreground.assign(points.size(), true);
  p.points = std::move(points);
  return p;
}

void PointPrompt::validate(const Image& image) const {
  if (points.empty()) throw InputError("point prompt needs at least one point");
  if (foreground.size() != points.size()) throw InputError("point prompt needs one label per point");
  for (const auto& p : points)
    if (!image.contains(p))
      throw InputError("prompt point (" + std::to_string(p.row) + "," + std::to_string(p.col) + ") outside the image");
}

const char* to_string(MaskSource source) { return source == MaskSource::remote ? "remote" : "builtin"; }

double boundary_contrast(const Image& image, const Mask& mask) {
  double sum = 0.0;
  std::size_t pairs = 0;
  auto visit = [&](int r0, int c0, int r1, int c1) {
    if (mask.at(r0, c0) == mask.at(r1, c1)) return;
    sum += std::abs(static_cast<double>(image.intensity(r0, c0)) - image.intensity(r1, c1));
    ++pairs;
  };
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c) {
      if (c + 1 < mask.width) visit(r, c, r, c + 1);
      if (r + 1 < mask.height) visit(r, c, r + 1, c);
    }
  return pairs == 0 ? 0.0 : std::clamp(sum / static_cast<double>(pairs), 0.0, 1.0);
}

namespace {

Mask grow_region(const Image& image, const std::vector<Pixel>& seeds, const Mask& blocked, const std::vector<double>& seedMean,
                 double tolerance) {
  const int ch = image.channels();
  auto admitted = [&](int r, int c) {
    if (blocked.at(r, c)) return false;
    for (int k = 0; k < ch; ++k)
      if (std::abs(static_cast<double>(image.at(r, c, k)) - seedMean[k]) > tolerance) return false;
    return true;
  };
  Mask mask(image.width(), image.height());
  std::vector<Pixel> stack;
  for (const auto& s : seeds)
    if (!mask.at(s.row, s.col) && admitted(s.row, s.col)) {
      mask.set(s.row, s.col, true);
      stack.push_back(s);
    }
  while (!stack.empty()) {
    Pixel p = stack.back();
    stack.pop_back();
    const Pixel nbrs[4] = {{p.row - 1, p.col}, {p.row + 1, p.col}, {p.row, p.col - 1}, {p.row, p.col + 1}};
    for (const auto& q : nbrs)
      if (image.contains(q) && !mask.at(q.row, q.col) && admitted(q.row, q.col)) {
        mask.set(q.row, q.col, true);
        stack.push_back(q);
      }
  }
  return mask;
}

}  // namespace

std::vector<MaskCandidate> segment_builtin(const Image& image, const PointPrompt& prompt, double tolerance) {
  if (!(tolerance > 0.0 && tolerance <= 1.0)) throw InputError("segmentation tolerance must lie in (0,1]");
  prompt.validate(image);

  std::vector<Pixel> seeds;
  Mask blocked(image.width(), image.height());
  for (std::size_t i = 0; i < prompt.points.size(); ++i) {
    if (prompt.foreground[i])
      seeds.push_back(prompt.points[i]);
    else
      blocked.set(prompt.points[i].row, prompt.points[i].col, true);
  }
  if (seeds.empty()) return {MaskCandidate{Mask(image.width(), image.height()), 0.0}};

  std::vector<double> mean(image.channels(), 0.0);
  for (const auto& s : seeds)
    for (int k = 0; k < image.channels(); ++k) mean[k] += image.at(s.row, s.col, k);
  for (double& m : mean) m /= static_cast<double>(seeds.size());

  std::vector<MaskCandidate> out;
  std::size_t admittedTotal = 0;
  for (double scale : kToleranceScales) {
    Mask m = grow_region(image, seeds, blocked, mean, scale * tolerance);
    admittedTotal += m.area();
    double conf = boundary_contrast(image, m);
    out.push_back({std::move(m), conf});
  }
  if (admittedTotal == 0) return {MaskCandidate{Mask(image.width(), image.height()), 0.0}};
  return out;
}

Image apply_mask(const Image& image, const Mask& mask) {
  if (mask.width != image.width() || mask.height != image.height()) throw InputError("mask and image dimensions differ");
  Image out = image;
  auto data = out.data();
  const int ch = image.channels();
  for (std::size_t p = 0; p < image.pixel_count(); ++p)
    if (!mask.bits[p])
      for (int k = 0; k < ch; ++k) data[p * ch + k] = 0.0f;
  return out;
}

SegmentedObject select_best(const std::vector<MaskCandidate>& candidates, const Image& image, MaskSource source) {
  if (candidates.empty()) throw InputError("select_best needs at least one candidate");
  std::size_t best = 0;
  auto better = [](const MaskCandidate& a, const MaskCandidate& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    const auto areaA = a.mask.area(), areaB = b.mask.area();
    if (areaA != areaB) return areaA > areaB;
    return a.mask.bits > b.mask.bits;
  };
  for (std::size_t i = 1; i < candidates.size(); ++i)
    if (better(candidates[i], candidates[best])) best = i;
  return {apply_mask(image, candidates[best].mask), candidates[best], source, static_cast<int>(best)};
}

std::string encode_segment_request(const Image& image, const PointPrompt& prompt) {
  json points = json::array(), labels = json::array();
  for (std::size_t i = 0; i < prompt.points.size(); ++i) {
    points.push_back({prompt.points[i].row, prompt.points[i].col});
    labels.push_back(prompt.foreground[i] ? 1 : 0);
  }
  return json{{"image", base64_encode(encode_png(image))}, {"points", points}, {"labels", labels}}.dump();
}

std::vector<MaskCandidate> parse_segment_response(const std::string& body, int width, int height) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("/segment response is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("masks") || !doc["masks"].is_array())
    throw ProtocolError("/segment response lacks a masks array");
  if (doc["masks"].empty()) throw ProtocolError("/segment response has zero candidates");
  std::vector<MaskCandidate> out;
  for (const auto& m : doc["masks"]) {
    if (!m.is_object()) throw ProtocolError("/segment mask entry is not an object");
    if (!m.contains("png") || !m["png"].is_string()) throw ProtocolError("/segment mask lacks a png string");
    if (!m.contains("confidence") || !m["confidence"].is_number())
      throw ProtocolError("/segment mask lacks a numeric confidence");
    const double conf = m["confidence"].get<double>();
    if (!std::isfinite(conf) || conf < 0.0 || conf > 1.0) throw ProtocolError("/segment confidence outside [0,1]");
    Mask mask;
    try {
      mask = decode_mask_png(base64_decode(m["png"].get<std::string>()));
    } catch (const InputError& e) {
      throw ProtocolError(std::string("/segment mask png undecodable: ") + e.what());
    }
    if (mask.width != width || mask.height != height)
      throw ProtocolError("/segment mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                          ", image is " + std::to_string(width) + "x" + std::to_string(height));
    out.push_back({std::move(mask), conf});
  }
  return out;
}

std::string encode_segment_response(const std::vector<MaskCandidate>& candidates) {
  json masks = json::array();
  for (const auto& c : candidates) masks.push_back({{"png", base64_encode(encode_mask_png(c.mask))}, {"confidence", c.confidence}});
  return json{{"masks", masks}}.dump();
}

std::vector<MaskCandidate> RemoteSegmenter::segment(const Image& image, const PointPrompt& prompt) const {
  return segment_remote(*transport_, image, prompt, retry_);
}

std::vector<MaskCandidate> segment_remote(const Transport& transport, const Image& image, const PointPrompt& prompt,
                                          const RetryPolicy& retry) {
  prompt.validate(image);
  const auto body = post_with_retry(transport, "/segment", encode_segment_request(image, prompt), retry);
  return parse_segment_response(body, image.width(), image.height());
}

}  // namespace vale
