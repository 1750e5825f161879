#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "core/image.hpp"
#include "core/types.hpp"

namespace sg {

void write_png_gray8(const std::filesystem::path& file, int width, int height,
                     const uint8_t* pixels);
void write_png_rgb8(const std::filesystem::path& file, int width, int height,
                    const uint8_t* pixels);
// 16-bit grayscale; used for identity maps (pixel value = instance id).
void write_png_gray16(const std::filesystem::path& file, int width, int height,
                      const uint16_t* pixels);

void write_png_rgb(const std::filesystem::path& file, const ImageRGB& image);
void write_png_identity(const std::filesystem::path& file, const IdentityMap& map);
void write_png_mask(const std::filesystem::path& file, const Mask2D& mask);
// Soft mask values in [0,1] written as 8-bit grayscale.
void write_png_soft(const std::filesystem::path& file, int width, int height,
                    const float* values);

// Reads an 8- or 16-bit grayscale PNG as an identity map.
IdentityMap read_png_identity(const std::filesystem::path& file);
// Reads any grayscale/RGB PNG as a binary mask (any nonzero sample -> 1).
Mask2D read_png_mask(const std::filesystem::path& file);

// PNG-encode an RGB image in memory (for the remote backend protocol).
std::vector<uint8_t> encode_png_rgb8(int width, int height, const uint8_t* pixels);

} // namespace sg
