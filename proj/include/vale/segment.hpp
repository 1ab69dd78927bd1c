#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vale/image.hpp"
#include "vale/transport.hpp"

namespace vale {

struct PointPrompt {
  std::vector<Pixel> points;
  std::vector<bool> foreground;  // one flag per point

  static PointPrompt foreground_only(std::vector<Pixel> points);
  /// Throws InputError unless there is at least one point, every point lies
  /// inside `image` and flags match points.
  void validate(const Image& image) const;
};

struct MaskCandidate {
  Mask mask;
  double confidence = 0.0;  // [0,1]
};

enum class MaskSource { builtin, remote };
const char* to_string(MaskSource source);

struct SegmentedObject {
  Image image;  // zero outside the mask
  MaskCandidate mask;
  MaskSource source = MaskSource::builtin;
  int candidateIndex = 0;
};

/// Tolerance multipliers of the three builtin candidates.
inline constexpr double kToleranceScales[3] = {0.5, 1.0, 2.0};

/// Region growing (4-connectivity) from the foreground points over pixels whose
/// every channel lies within the scaled tolerance of the seed mean; background
/// points are never admitted. One candidate per scale in kToleranceScales.
/// Confidence is the mean absolute intensity step across the mask boundary
/// (0 when the mask has no boundary). When no pixel is admitted at any scale
/// a single empty candidate with confidence 0 is returned.
std::vector<MaskCandidate> segment_builtin(const Image& image, const PointPrompt& prompt, double tolerance);

/// Mean |intensity(in) - intensity(out)| over 4-neighbor pairs straddling the
/// mask boundary, clamped to [0,1].
double boundary_contrast(const Image& image, const Mask& mask);

/// Highest confidence; ties prefer the larger mask, then compare masks
/// lexicographically so the result never depends on candidate order.
SegmentedObject select_best(const std::vector<MaskCandidate>& candidates, const Image& image,
                            MaskSource source = MaskSource::builtin);

/// Zeroes every pixel outside `mask`.
Image apply_mask(const Image& image, const Mask& mask);

class RemoteSegmenter {
 public:
  RemoteSegmenter(std::shared_ptr<const Transport> transport, RetryPolicy retry = {})
      : transport_(std::move(transport)), retry_(retry) {}

  /// POST /segment. Throws TransportError or ProtocolError.
  std::vector<MaskCandidate> segment(const Image& image, const PointPrompt& prompt) const;

 private:
  std::shared_ptr<const Transport> transport_;
  RetryPolicy retry_;
};

std::vector<MaskCandidate> segment_remote(const Transport& transport, const Image& image, const PointPrompt& prompt,
                                          const RetryPolicy& retry = {});

// Wire format of POST /segment.
std::string encode_segment_request(const Image& image, const PointPrompt& prompt);
/// Validates candidate count, base64/PNG payloads, dimensions and confidence.
std::vector<MaskCandidate> parse_segment_response(const std::string& body, int width, int height);
std::string encode_segment_response(const std::vector<MaskCandidate>& candidates);

}  // namespace vale
