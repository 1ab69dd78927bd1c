#include <doctest.h>

#include <algorithm>
#include <nlohmann/json.hpp>

#include "vale/codec.hpp"
#include "vale/error.hpp"
#include "vale/segment.hpp"

using namespace vale;

namespace {

// Dark background with a bright rectangle [r0,r1) x [c0,c1).
Image block(int w, int h, int r0, int r1, int c0, int c1, float bg = 0.1f, float fg = 0.8f) {
  Image img(w, h, 1, bg);
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) img.at(r, c) = fg;
  return img;
}

Mask rect_mask(int w, int h, int r0, int r1, int c0, int c1) {
  Mask m(w, h);
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) m.set(r, c, true);
  return m;
}

}  // namespace

TEST_CASE("builtin segmentation recovers a block") {
  const Image img = block(32, 24, 5, 15, 8, 20);
  const auto cands = segment_builtin(img, PointPrompt::foreground_only({{10, 12}}), 0.1);
  REQUIRE(cands.size() == 3);
  CHECK(cands[1].mask == rect_mask(32, 24, 5, 15, 8, 20));
  const auto best = select_best(cands, img);
  CHECK(best.mask.mask == rect_mask(32, 24, 5, 15, 8, 20));
  const auto twoSeeds = segment_builtin(img, PointPrompt::foreground_only({{10, 12}, {6, 18}}), 0.1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(twoSeeds[i].mask == cands[i].mask);
  CHECK(best.mask.confidence == doctest::Approx(0.7));
  CHECK(best.source == MaskSource::builtin);
  for (int r = 0; r < 24; ++r)
    for (int c = 0; c < 32; ++c) CHECK(best.image.at(r, c) == (best.mask.mask.at(r, c) ? img.at(r, c) : 0.0f));
}

TEST_CASE("candidates nest with growing tolerance") {
  Image img(20, 20, 1);
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 20; ++c) img.at(r, c) = static_cast<float>(c) / 19.0f;
  const auto cands = segment_builtin(img, PointPrompt::foreground_only({{10, 10}}), 0.1);
  REQUIRE(cands.size() == 3);
  CHECK(is_subset(cands[0].mask, cands[1].mask));
  CHECK(is_subset(cands[1].mask, cands[2].mask));
  CHECK(cands[0].mask.area() < cands[2].mask.area());
}

TEST_CASE("background points are never admitted") {
  const Image img = block(16, 16, 0, 16, 0, 16, 0.5f, 0.5f);
  PointPrompt prompt;
  prompt.points = {{8, 8}, {8, 9}};
  prompt.foreground = {true, false};
  const auto cands = segment_builtin(img, prompt, 0.2);
  for (const auto& c : cands) CHECK_FALSE(c.mask.at(8, 9));
}

TEST_CASE("whole-image masks have zero confidence") {
  const Image flat(10, 10, 1, 0.3f);
  const auto cands = segment_builtin(flat, PointPrompt::foreground_only({{2, 2}}), 0.1);
  for (const auto& c : cands) {
    CHECK(c.mask.area() == 100);
    CHECK(c.confidence == 0.0);
  }
}

TEST_CASE("only background points give one empty candidate") {
  const Image img(8, 8, 1, 0.3f);
  PointPrompt prompt{{{1, 1}}, {false}};
  const auto cands = segment_builtin(img, prompt, 0.1);
  REQUIRE(cands.size() == 1);
  CHECK(cands[0].mask.area() == 0);
  CHECK(cands[0].confidence == 0.0);
}

TEST_CASE("prompt validation") {
  const Image img(8, 8, 1);
  CHECK_THROWS_AS(segment_builtin(img, PointPrompt{}, 0.1), InputError);
  CHECK_THROWS_AS(segment_builtin(img, PointPrompt::foreground_only({{8, 0}}), 0.1), InputError);
  CHECK_THROWS_AS(segment_builtin(img, PointPrompt{{{1, 1}}, {true, false}}, 0.1), InputError);
  CHECK_THROWS_AS(segment_builtin(img, PointPrompt::foreground_only({{1, 1}}), 0.0), InputError);
}

TEST_CASE("select_best ignores candidate order") {
  const Image img(4, 1, 1, 0.5f);
  Mask a(4, 1), b(4, 1), c(4, 1);
  a.set(0, 0, true);
  b.set(0, 3, true);
  c.set(0, 1, true);
  c.set(0, 2, true);
  std::vector<MaskCandidate> cands{{a, 0.5}, {b, 0.5}, {c, 0.5}, {a, 0.2}};
  const Mask first = select_best(cands, img).mask.mask;
  CHECK(first == c);  // larger area wins the tie
  std::vector<MaskCandidate> two{{b, 0.5}, {a, 0.5}};
  CHECK(select_best(two, img).mask.mask == select_best({{a, 0.5}, {b, 0.5}}, img).mask.mask);
  CHECK(select_best({{a, 0.1}, {b, 0.9}}, img).candidateIndex == 1);
  CHECK_THROWS_AS(select_best({}, img), InputError);
}

TEST_CASE("segment wire format round trips") {
  const Image img = block(12, 9, 2, 6, 3, 9);
  const auto cands = segment_builtin(img, PointPrompt::foreground_only({{3, 4}}), 0.1);
  const auto parsed = parse_segment_response(encode_segment_response(cands), 12, 9);
  REQUIRE(parsed.size() == cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    CHECK(parsed[i].mask == cands[i].mask);
    CHECK(parsed[i].confidence == cands[i].confidence);
  }
  const auto req = nlohmann::json::parse(encode_segment_request(img, PointPrompt{{{3, 4}, {0, 0}}, {true, false}}));
  CHECK(req["points"] == nlohmann::json::parse("[[3,4],[0,0]]"));
  CHECK(req["labels"] == nlohmann::json::parse("[1,0]"));
  CHECK(decode_png(base64_decode(req["image"].get<std::string>())) == Image::from_bytes(12, 9, 1, img.to_bytes()));
  CHECK_THROWS_AS(parse_segment_response(encode_segment_response(cands), 12, 8), ProtocolError);
  CHECK_THROWS_AS(parse_segment_response(R"({"masks": []})", 12, 9), ProtocolError);
}

TEST_CASE("remote segmentation through an in-process transport") {
  const Image img = block(12, 9, 2, 6, 3, 9);
  auto transport = std::make_shared<InProcessTransport>();
  transport->route("/segment", [&](const std::string& body) {
    const auto doc = nlohmann::json::parse(body);
    CHECK(doc["points"].size() == 1);
    return HttpResponse{200, encode_segment_response({{rect_mask(12, 9, 2, 6, 3, 9), 0.932}})};
  });
  const RemoteSegmenter seg(transport, {1, std::chrono::milliseconds(0)});
  const auto out = seg.segment(img, PointPrompt::foreground_only({{3, 4}}));
  REQUIRE(out.size() == 1);
  CHECK(out[0].confidence == 0.932);
  const auto best = select_best(out, img, MaskSource::remote);
  CHECK(best.source == MaskSource::remote);
  CHECK(std::string(to_string(best.source)) == "remote");
}
