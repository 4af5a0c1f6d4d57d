#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "sonoseg/grid.hpp"

namespace sonoseg {

// 8-bit grayscale PNG, one image row per grid row.
std::string encode_png(const Grid<std::uint8_t>& image);
Grid<std::uint8_t> decode_png(const std::string& bytes);

void write_png(const Grid<std::uint8_t>& image, const std::filesystem::path& path);

// Binary mask as 0/255.
void write_mask_png(const Grid<unsigned char>& mask, const std::filesystem::path& path);

// Linear rescale of [min, max] onto [0, 255]; constant grids map to 0.
Grid<std::uint8_t> to_gray(const RealGrid& values);

}  // namespace sonoseg
