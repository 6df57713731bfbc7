#include "scanet/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "scanet/errors.hpp"

namespace scanet {
namespace {

std::uint8_t quantize(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

void write_raw(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes, int64_t h,
               int64_t w, png_uint_32 format) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w);
    img.height = static_cast<png_uint_32>(h);
    img.format = format;
    if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr)) {
        std::string msg = std::string("cannot write PNG (") + img.message + ")";
        png_image_free(&img);
        throw IoError(path, msg);
    }
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw IoError(path, std::string("cannot open PNG (") + img.message + ")");
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        std::string msg = std::string("cannot decode PNG (") + img.message + ")";
        png_image_free(&img);
        throw IoError(path, msg);
    }
    Image out(img.height, img.width);
    const std::size_t n = out.pixels();
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) out.data[c * n + i] = buf[3 * i + c] / 255.0f;
    }
    return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
    const std::size_t n = image.pixels();
    std::vector<std::uint8_t> bytes(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) bytes[3 * i + c] = quantize(image.data[c * n + i]);
    }
    write_raw(path, bytes, image.height, image.width, PNG_FORMAT_RGB);
}

void write_png(const std::filesystem::path& path, const Plane& plane) {
    std::vector<std::uint8_t> bytes(plane.size());
    std::transform(plane.data.begin(), plane.data.end(), bytes.begin(), quantize);
    write_raw(path, bytes, plane.height, plane.width, PNG_FORMAT_GRAY);
}

}  // namespace scanet
