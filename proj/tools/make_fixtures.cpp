// Regenerates the bundled mock fixtures under <dir> (default: fixtures/).
//
//   make_fixtures [dir]
//
// Everything is synthetic and deterministic; rerunning reproduces the
// committed files byte for byte.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>

#include "vale/codec.hpp"
#include "vale/mock_shim.hpp"
#include "vale/partition.hpp"
#include "vale/prompt.hpp"
#include "vale/segment.hpp"
#include "vale/vlm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using vale::Image;
using vale::Mask;

namespace {

constexpr int kSize = 224;

bool in_ellipse(int r, int c, double cr, double cc, double rr, double rc) {
  const double dr = (r - cr) / rr, dc = (c - cc) / rc;
  return dr * dr + dc * dc <= 1.0;
}

struct EagleParts {
  Mask head{kSize, kSize}, beak{kSize, kSize}, body{kSize, kSize}, tail{kSize, kSize};
};

EagleParts eagle_parts() {
  EagleParts p;
  for (int r = 0; r < kSize; ++r)
    for (int c = 0; c < kSize; ++c) {
      p.head.set(r, c, in_ellipse(r, c, 70, 112, 26, 26));
      p.beak.set(r, c, r >= 70 && r <= 80 && c >= 136 && c <= 150 && (c - 136) <= 2 * (80 - r) + 4);
      p.body.set(r, c, !p.head.at(r, c) && in_ellipse(r, c, 140, 112, 52, 40));
      p.tail.set(r, c, r >= 188 && r < 204 && c >= 100 && c < 124 && !p.body.at(r, c));
    }
  return p;
}

Mask unite(std::initializer_list<const Mask*> parts) {
  Mask out(kSize, kSize);
  for (std::size_t i = 0; i < out.bits.size(); ++i)
    for (const Mask* m : parts) out.bits[i] |= m->bits[i];
  return out;
}

Image eagle_image(const EagleParts& p) {
  Image img(kSize, kSize, 3);
  for (int r = 0; r < kSize; ++r)
    for (int c = 0; c < kSize; ++c) {
      float rgb[3] = {0.50f + 0.10f * r / kSize, 0.66f + 0.08f * r / kSize, 0.88f};
      auto paint = [&](float a, float b, float d) { rgb[0] = a, rgb[1] = b, rgb[2] = d; };
      if (r >= 204 && r < 214) paint(0.36f, 0.25f, 0.14f);  // perch
      if (p.body.at(r, c)) paint(0.28f + 0.04f * ((r / 6 + c / 9) % 2), 0.19f, 0.11f);
      if (p.tail.at(r, c)) paint(0.94f, 0.94f, 0.92f);
      if (p.head.at(r, c)) paint(0.96f, 0.96f, 0.94f);
      if (p.beak.at(r, c)) paint(0.96f, 0.76f, 0.16f);
      if (in_ellipse(r, c, 64, 122, 3, 3)) paint(0.10f, 0.08f, 0.05f);  // eye
      for (int k = 0; k < 3; ++k) img.at(r, c, k) = rgb[k];
    }
  return img;
}

double rect_mean(const Image& img, int r0, int r1, int c0, int c1) {
  double sum = 0.0;
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) sum += img.intensity(r, c);
  return sum / ((r1 - r0) * (c1 - c0));
}

void write_json(const fs::path& path, const json& doc) { vale::write_text(path, doc.dump(2) + "\n"); }

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("fixtures");
  const fs::path eagleDir = root / "bald_eagle";
  fs::create_directories(eagleDir);

  const EagleParts parts = eagle_parts();
  const Image image = eagle_image(parts);
  vale::write_file(eagleDir / "image.png", vale::encode_png(image));
  const std::string digest = vale::image_digest(image);

  vale::MockShim shim;
  const std::vector<std::string> labels{"bald_eagle", "kite", "vulture", "great_grey_owl", "goldfinch"};
  shim.add_prediction(digest, {labels, {1.0, 0.0, 0.0, 0.0, 0.0}});
  // Masked variants fall back to a detector keyed on the white head, tuned
  // so the unmasked image scores ~1 and the fully blurred one ~0.
  vale::MockPredictFallback fallback;
  fallback.labels = labels;
  fallback.positive = "bald_eagle";
  fallback.top = 48.0 / kSize;
  fallback.bottom = 92.0 / kSize;
  fallback.left = 90.0 / kSize;
  fallback.right = 134.0 / kSize;
  const double sharp = rect_mean(image, 48, 92, 90, 134);
  const double blurred = rect_mean(vale::box_blur(image, 8), 48, 92, 90, 134);
  fallback.threshold = 0.5 * (sharp + blurred);
  fallback.gain = 20.0 / (sharp - blurred);
  shim.set_predict_fallback(fallback);

  const Mask bird = unite({&parts.head, &parts.beak, &parts.body, &parts.tail});
  const Mask head = unite({&parts.head, &parts.beak});
  shim.add_segmentation(digest, {{head, 0.874}, {bird, 0.932}, {parts.body, 0.811}});

  const Image segmented = vale::apply_mask(image, bird);
  const std::string segDigest = vale::image_digest(segmented);
  const std::string fullCaption =
      "The image shows a bald eagle perched on a branch. Its white head and tail feathers contrast with the dark "
      "brown body, and the hooked yellow beak points to the right.";
  for (const auto& t : vale::PromptRegistry::builtins()) {
    const auto prompt = vale::render(t, "bald_eagle").rendered;
    shim.add_caption(segDigest, prompt, t.id == "bare" ? "A bird with a white head sitting on a branch." : fullCaption,
                     "mock-vlm");
  }
  vale::write_text(eagleDir / "shim.json", shim.to_json());

  write_json(eagleDir / "config.json",
             {{"predictor", {{"kind", "remote"}, {"endpoint", "mock:."}, {"inputSize", {kSize, kSize}}}},
              {"partition", {{"method", "slic"}, {"targetRegions", 196}, {"compactness", 0.1}, {"iterations", 10}}},
              {"masking", {{"mode", "blur"}, {"blurRadius", 8}}},
              {"estimator", {{"sampler", "permutation"}, {"maxEvaluations", 1000}, {"batchSize", 50}}},
              {"seed", 7},
              {"roiK", 1},
              {"segmenter", {{"source", "remote"}, {"endpoint", "mock:."}}},
              {"prompt", {{"id", "default-imagenet"}, {"templates", "../templates.json"}}},
              {"caption", {{"mode", "remote"}, {"endpoint", "mock:."}}},
              {"references", "../references.json"}});

  write_json(root / "templates.json",
             json::array({{{"id", "default-imagenet-shown"},
                           {"text", "Explain the object shown in the image: '{predicted label}'?"}},
                          {{"id", "describe-shown"}, {"text", "Describe the {predicted label} shown in the image."}},
                          {{"id", "features"},
                           {"text", "Which visual features show that this is a '{predicted label}'?"}}}));

  write_json(root / "references.json",
             json::array({{{"id", "eagle-1"},
                           {"class", "bald_eagle"},
                           {"text", "A bald eagle with a white head and tail, a dark brown body and a yellow hooked beak "
                                    "perched on a branch."}},
                          {{"id", "eagle-2"},
                           {"class", "bald_eagle"},
                           {"text", "The bird has a white head, a strong yellow beak and dark brown wings."}},
                          {{"id", "sonar-1"},
                           {"class", "mine_like"},
                           {"text", "A bright cylindrical return casting a long acoustic shadow on the seabed."}}}));

  write_json(root / "hypotheses.json",
             json::array({{{"id", "eagle-1"}, {"class", "bald_eagle"}, {"promptId", "default-imagenet"}, {"text", fullCaption}},
                          {{"id", "eagle-2"}, {"class", "bald_eagle"}, {"promptId", "default-imagenet"}, {"text", fullCaption}},
                          {{"id", "eagle-1"},
                           {"class", "bald_eagle"},
                           {"promptId", "bare"},
                           {"text", "A bird with a white head sitting on a branch."}},
                          {{"id", "sonar-1"},
                           {"class", "mine_like"},
                           {"promptId", "sonar-custom"},
                           {"text", "A bright cylindrical object with an acoustic shadow on the seabed."}}}));

  std::cout << "fixtures written to " << root.string() << "\n";
  return 0;
}
