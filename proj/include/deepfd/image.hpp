#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "deepfd/tensor.hpp"

namespace deepfd {

// 8-bit RGB image, interleaved row-major (the PPM byte order).
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), rgb(w * h * 3, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return rgb[(y * width + x) * 3 + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return rgb[(y * width + x) * 3 + c]; }

  friend bool operator==(const Image&, const Image&) = default;
};

// Single-channel 8-bit image (PGM).
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> values;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

std::vector<std::uint8_t> encode_ppm(const Image& image);
// Binary P6 with maxval 255. `name` is used in error messages.
Image decode_ppm(std::span<const std::uint8_t> bytes, const std::string& name);
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes, const std::string& name);

// Throw LoadError (read) or IoError (write) naming the path.
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& image);
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

// pixel / 127.5 - 1, as a 3 x H x W tensor.
template <typename T>
Tensor<T> normalize_image(const Image& image);

// Stacks normalized images into N x 3 x H x W.
template <typename T>
Tensor<T> stack_images(std::span<const Image* const> images);

}  // namespace deepfd
