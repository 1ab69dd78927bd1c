#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "vale/codec.hpp"
#include "vale/error.hpp"
#include "vale/image.hpp"

using namespace vale;

namespace {

Bytes as_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

Image quantized_random(int w, int h, int ch, unsigned seed) {
  std::mt19937 rng(seed);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h * ch);
  for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
  return Image::from_bytes(w, h, ch, bytes);
}

}  // namespace

TEST_CASE("image construction enforces its invariants") {
  CHECK_THROWS_AS(Image(0, 4, 1), InputError);
  CHECK_THROWS_AS(Image(4, 4, 2), InputError);
  CHECK_THROWS_AS(Image(2, 1, 1, std::vector<float>{0.5f}), InputError);
  CHECK_THROWS_AS(Image(2, 1, 1, std::vector<float>{0.5f, 1.5f}), InputError);
  CHECK_THROWS_AS(Image(2, 1, 1, std::vector<float>{0.5f, std::nanf("")}), InputError);
  Image ok(2, 1, 3, 0.25f);
  CHECK(ok.value_count() == 6);
  CHECK(ok.intensity(0, 1) == doctest::Approx(0.25));
}

TEST_CASE("png round trip is exact at 8 bits") {
  for (int ch : {1, 3}) {
    const Image img = quantized_random(19, 7, ch, 3u + ch);
    const Image back = decode_png(encode_png(img));
    CHECK(back == img);
  }
  CHECK(encode_png(quantized_random(5, 5, 3, 1)) == encode_png(quantized_random(5, 5, 3, 1)));
}

TEST_CASE("mask png is 1-bit and round trips") {
  Mask m(13, 5);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 13; ++c) m.set(r, c, (r * 7 + c * 3) % 4 == 0);
  const auto png = encode_mask_png(m);
  CHECK(png[24] == 1);  // IHDR bit depth
  CHECK(decode_mask_png(png) == m);
}

TEST_CASE("png decoding rejects garbage") {
  CHECK_THROWS_AS(decode_png(as_bytes("not a png")), InputError);
  auto png = encode_png(Image(4, 4, 1, 0.5f));
  png.resize(png.size() / 2);
  CHECK_THROWS_AS(decode_png(png), InputError);
}

TEST_CASE("base64 and sha256 match published vectors") {
  CHECK(base64_encode(as_bytes("")) == "");
  CHECK(base64_encode(as_bytes("f")) == "Zg==");
  CHECK(base64_encode(as_bytes("foob")) == "Zm9vYg==");
  CHECK(base64_encode(as_bytes("foobar")) == "Zm9vYmFy");
  CHECK(base64_decode("Zm9vYmE=") == as_bytes("fooba"));
  CHECK_THROWS_AS(base64_decode("Zm9v!mFy"), ProtocolError);
  CHECK_THROWS_AS(base64_decode("Zm9"), ProtocolError);
  CHECK(sha256_hex(as_bytes("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("grayscale and rgb conversion") {
  Image rgb(1, 1, 3);
  rgb.at(0, 0, 0) = 1.0f;
  CHECK(to_grayscale(rgb).at(0, 0) == doctest::Approx(0.299));
  const Image gray(2, 2, 1, 0.4f);
  const Image back = to_rgb(gray);
  CHECK(back.channels() == 3);
  CHECK(back.at(1, 1, 2) == 0.4f);
}

TEST_CASE("bilinear resize") {
  const Image img = quantized_random(9, 6, 3, 8);
  CHECK(resize_bilinear(img, 9, 6) == img);
  const Image flat(7, 5, 1, 0.3f);
  const Image up = resize_bilinear(flat, 20, 11);
  for (float v : up.data()) CHECK(v == doctest::Approx(0.3f));
  // Two-pixel ramp upsampled 2x: half-pixel centers give 0, 0.25, 0.75, 1.
  const Image ramp(2, 1, 1, std::vector<float>{0.0f, 1.0f});
  const Image r4 = resize_bilinear(ramp, 4, 1);
  CHECK(r4.at(0, 0) == doctest::Approx(0.0));
  CHECK(r4.at(0, 1) == doctest::Approx(0.25));
  CHECK(r4.at(0, 2) == doctest::Approx(0.75));
  CHECK(r4.at(0, 3) == doctest::Approx(1.0));
  CHECK_THROWS_AS(resize_bilinear(img, 0, 3), InputError);
}

TEST_CASE("mask IoU and subset") {
  Mask a(4, 1), b(4, 1);
  CHECK(intersection_over_union(a, b) == 1.0);
  a.set(0, 0, true);
  a.set(0, 1, true);
  b.set(0, 1, true);
  CHECK(intersection_over_union(a, b) == doctest::Approx(0.5));
  CHECK(is_subset(b, a));
  CHECK_FALSE(is_subset(a, b));
}
