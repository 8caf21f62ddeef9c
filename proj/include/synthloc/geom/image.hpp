#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "synthloc/geom/pose.hpp"

namespace synthloc {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Rgb&) const = default;
};

// Interleaved 8-bit RGB, row-major.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, Rgb fill = {});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  Rgb at(int x, int y) const {
    const std::uint8_t* p = &data_[3 * (static_cast<std::size_t>(y) * width_ + x)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    std::uint8_t* p = &data_[3 * (static_cast<std::size_t>(y) * width_ + x)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }
  const std::vector<std::uint8_t>& data() const { return data_; }
  std::vector<std::uint8_t>& data() { return data_; }

  bool operator==(const RgbImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Metric depth in meters; 0 means "no depth".
class DepthImage {
 public:
  DepthImage() = default;
  DepthImage(int width, int height, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  float at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int x, int y, float z) { values_[static_cast<std::size_t>(y) * width_ + x] = z; }
  const std::vector<float>& values() const { return values_; }
  std::vector<float>& values() { return values_; }

  bool operator==(const DepthImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> values_;
};

// Synthetic view: color, pixel-aligned depth, and the camera-to-world pose it came from.
struct RenderedPair {
  RgbImage rgb;
  DepthImage depth;
  Pose pose;
};

// 8-bit luminance (ITU-R BT.601 weights, integer arithmetic).
std::vector<std::uint8_t> to_gray(const RgbImage& img);

// Depth on disk: 16-bit grayscale PNG, 1 mm per unit, 0 = invalid, saturating at 65535.
constexpr double kDepthPngScale = 1000.0;
std::uint16_t encode_depth_mm(float meters);

void write_rgb_png(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_rgb_png(const std::filesystem::path& path);
void write_depth_png(const std::filesystem::path& path, const DepthImage& depth);
DepthImage read_depth_png(const std::filesystem::path& path);

}  // namespace synthloc
