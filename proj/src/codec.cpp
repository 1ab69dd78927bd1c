#include "vale/codec.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <cctype>
#include <cstring>
#include <fstream>
#include <memory>

#include "vale/error.hpp"

namespace vale {

namespace {

void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

[[noreturn]] void png_fail(png_structp, png_const_charp message) { throw InputError(std::string("png: ") + message); }

void png_warn_ignore(png_structp, png_const_charp) {}

// rows: height rows of `rowBytes` packed bytes each.
Bytes write_png_rows(int width, int height, int bitDepth, int colorType, const std::vector<std::vector<png_byte>>& rows) {
  Bytes out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn_ignore);
  if (!png) throw InputError("png: cannot create writer");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  png_set_write_fn(png, &out, png_append, png_flush_noop);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bitDepth, colorType,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (const auto& row : rows) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  return out;
}

}  // namespace

Bytes encode_png(const Image& image) {
  const auto bytes = image.to_bytes();
  const std::size_t rowBytes = static_cast<std::size_t>(image.width()) * image.channels();
  std::vector<std::vector<png_byte>> rows(image.height());
  for (int r = 0; r < image.height(); ++r)
    rows[r].assign(bytes.begin() + r * rowBytes, bytes.begin() + (r + 1) * rowBytes);
  return write_png_rows(image.width(), image.height(), 8, image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                        rows);
}

Bytes encode_mask_png(const Mask& mask) {
  if (mask.width <= 0 || mask.height <= 0) throw InputError("mask dimensions must be positive");
  std::vector<std::vector<png_byte>> rows(mask.height, std::vector<png_byte>((mask.width + 7) / 8, 0));
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c)
      if (mask.at(r, c)) rows[r][c / 8] |= static_cast<png_byte>(0x80u >> (c % 8));
  return write_png_rows(mask.width, mask.height, 1, PNG_COLOR_TYPE_GRAY, rows);
}

Image decode_png(std::span<const std::uint8_t> png) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, png.data(), png.size()))
    throw InputError(std::string("png decode failed: ") + img.message);
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Bytes buffer(PNG_IMAGE_SIZE(img));
  png_color black{0, 0, 0};
  if (!png_image_finish_read(&img, &black, buffer.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw InputError("png decode failed: " + msg);
  }
  return Image::from_bytes(static_cast<int>(img.width), static_cast<int>(img.height), color ? 3 : 1, buffer);
}

Mask decode_mask_png(std::span<const std::uint8_t> png) {
  Image gray = to_grayscale(decode_png(png));
  Mask mask(gray.width(), gray.height());
  auto values = gray.data();
  for (std::size_t i = 0; i < values.size(); ++i) mask.bits[i] = values[i] > 0.0f ? 1 : 0;
  return mask;
}

Image read_png(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  try {
    return decode_png(bytes);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ProtocolError("base64 length is not a multiple of 4");
  for (char ch : text)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '+' || ch == '/' || ch == '='))
      throw ProtocolError("invalid base64 character");
  Bytes out(3 * (text.size() / 4));
  int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw ProtocolError("invalid base64 payload");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

}  // namespace vale
