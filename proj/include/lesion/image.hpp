#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lesion {

inline constexpr int kChannels = 3;

// 8-bit RGB raster, row-major, channels interleaved (HxWx3).
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * kChannels) {}

  std::uint8_t& at(int y, int x, int c) { return pixels[index(y, x, c)]; }
  std::uint8_t at(int y, int x, int c) const { return pixels[index(y, x, c)]; }

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * kChannels + c;
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// Real-valued HxWx3 array in the same layout as RgbImage.
struct Tensor3 {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w * kChannels, fill) {}

  double& at(int y, int x, int c) { return data[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data[index(y, x, c)]; }

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * kChannels + c;
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

// Decodes a JPEG/PNG file into RGB. Throws UnreadableImage.
RgbImage decode_image(const std::filesystem::path& path);

// Lossless PNG writer; used for fixtures and debugging.
void write_png(const std::filesystem::path& path, const RgbImage& image);

// Debug dump: one ASCII header line "H W 3\n" followed by H*W*3 little-endian
// float32 values in row-major HWC order.
void dump_tensor(const std::filesystem::path& path, const Tensor3& tensor);
Tensor3 load_tensor_dump(const std::filesystem::path& path);

}  // namespace lesion
