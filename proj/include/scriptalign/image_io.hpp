#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scriptalign/core.hpp"

namespace scriptalign {

// Raw 8-bit grayscale grid, row-major.
struct GrayRaster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;
};

// Decodes PNG (any color type, reduced to 8-bit gray) or binary/ASCII PGM,
// chosen by file signature.
GrayRaster read_raster(const std::filesystem::path& path);

// read_raster followed by normalize_image.
SubwordImage read_image(const std::filesystem::path& path);

// Intensities are quantized with round(v * 255).
GrayRaster quantize(const SubwordImage& img);

void write_pgm(const std::filesystem::path& path, const SubwordImage& img);
void write_png(const std::filesystem::path& path, const SubwordImage& img);
std::vector<std::uint8_t> encode_png(const SubwordImage& img);

}  // namespace scriptalign
