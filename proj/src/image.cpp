#include "synthloc/geom/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "synthloc/error.hpp"

namespace synthloc {

RgbImage::RgbImage(int width, int height, Rgb fill) : width_(width), height_(height) {
  data_.resize(3 * static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

DepthImage::DepthImage(int width, int height, float fill)
    : width_(width), height_(height), values_(static_cast<std::size_t>(width) * height, fill) {}

std::vector<std::uint8_t> to_gray(const RgbImage& img) {
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(img.width()) * img.height());
  const auto& d = img.data();
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const int v = 299 * d[3 * i] + 587 * d[3 * i + 1] + 114 * d[3 * i + 2];
    gray[i] = static_cast<std::uint8_t>((v + 500) / 1000);
  }
  return gray;
}

std::uint16_t encode_depth_mm(float meters) {
  if (!(meters > 0.0f) || !std::isfinite(meters)) return 0;
  const double mm = std::round(static_cast<double>(meters) * kDepthPngScale);
  return static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
}

void write_rgb_png(const std::filesystem::path& path, const RgbImage& img) {
  cv::Mat bgr(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      const Rgb c = img.at(x, y);
      row[x] = cv::Vec3b(c.b, c.g, c.r);
    }
  }
  if (!cv::imwrite(path.string(), bgr)) throw DataError("cannot write image " + path.string());
}

RgbImage read_rgb_png(const std::filesystem::path& path) {
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DataError("cannot read image " + path.string());
  RgbImage img(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) img.set(x, y, {row[x][2], row[x][1], row[x][0]});
  }
  return img;
}

void write_depth_png(const std::filesystem::path& path, const DepthImage& depth) {
  cv::Mat mm(depth.height(), depth.width(), CV_16UC1);
  for (int y = 0; y < depth.height(); ++y) {
    auto* row = mm.ptr<std::uint16_t>(y);
    for (int x = 0; x < depth.width(); ++x) row[x] = encode_depth_mm(depth.at(x, y));
  }
  if (!cv::imwrite(path.string(), mm)) throw DataError("cannot write depth " + path.string());
}

DepthImage read_depth_png(const std::filesystem::path& path) {
  const cv::Mat mm = cv::imread(path.string(), cv::IMREAD_ANYDEPTH);
  if (mm.empty()) throw DataError("cannot read depth " + path.string());
  if (mm.type() != CV_16UC1) throw DataError("depth image is not 16-bit single channel: " + path.string());
  DepthImage depth(mm.cols, mm.rows);
  for (int y = 0; y < mm.rows; ++y) {
    const auto* row = mm.ptr<std::uint16_t>(y);
    for (int x = 0; x < mm.cols; ++x) {
      depth.set(x, y, static_cast<float>(row[x] / kDepthPngScale));
    }
  }
  return depth;
}

}  // namespace synthloc
