#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vale/image.hpp"

namespace vale {

using Bytes = std::vector<std::uint8_t>;

// PNG. Encoding uses fixed zlib settings and writes no time chunk, so equal
// inputs always produce byte-identical files.
Bytes encode_png(const Image& image);
/// 1-bit grayscale PNG.
Bytes encode_mask_png(const Mask& mask);
/// Decodes any PNG into a 1-channel (gray) or 3-channel image; alpha is
/// composited onto black. Throws InputError on undecodable data.
Image decode_png(std::span<const std::uint8_t> png);
/// Any nonzero gray level counts as inside the mask.
Mask decode_mask_png(std::span<const std::uint8_t> png);

Image read_png(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
Bytes read_file(const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws ProtocolError on malformed input.
Bytes base64_decode(std::string_view text);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

}  // namespace vale
