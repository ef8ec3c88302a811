#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "spotid/imaging.hpp"

namespace spotid::imaging {

using Bytes = std::vector<std::uint8_t>;

// Decodes PNG or JPEG bytes into normalized RGB (8-bit sources / 255,
// 16-bit sources / 65535). Throws DecodeError.
RgbImage decode_rgb(std::span<const std::uint8_t> bytes);
RgbImage read_rgb(const std::filesystem::path& path);

// Masks are 8-bit grayscale PNG, foreground 255 and background 0. On
// decode any pixel >= 128 is foreground, so anti-aliased annotations load.
BinaryMask decode_mask(std::span<const std::uint8_t> bytes);
BinaryMask read_mask(const std::filesystem::path& path);

Bytes encode_mask_png(const BinaryMask& mask);
void write_mask_png(const BinaryMask& mask, const std::filesystem::path& path);

Bytes encode_gray_png(const GrayImage& img);
Bytes encode_rgb_png(const RgbImage& img);
void write_rgb_png(const RgbImage& img, const std::filesystem::path& path);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace spotid::imaging
