#pragma once

#include <filesystem>

#include "scanet/image.hpp"

namespace scanet {

// Reads 8/16-bit gray, gray+alpha, RGB or RGBA PNG into a [0,1] RGB image.
Image read_png(const std::filesystem::path& path);

// 8-bit RGB. Values are clamped to [0,1] and rounded.
void write_png(const std::filesystem::path& path, const Image& image);

// 8-bit grayscale.
void write_png(const std::filesystem::path& path, const Plane& plane);

}  // namespace scanet
