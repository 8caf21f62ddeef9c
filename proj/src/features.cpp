#include "synthloc/features/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <opencv2/features2d.hpp>
#include <opencv2/imgproc.hpp>

#include "synthloc/error.hpp"

namespace synthloc {

namespace {

cv::Mat gray_mat(const RgbImage& img) {
  std::vector<std::uint8_t> g = to_gray(img);
  return cv::Mat(img.height(), img.width(), CV_8U, g.data()).clone();
}

// Bresenham circle of radius 3, clockwise from 12 o'clock.
constexpr int kCircle[16][2] = {{0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
                                {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};

// Segment test: 9 contiguous circle pixels all brighter than centre + t or all
// darker than centre - t. Score is the summed contrast beyond t over the circle.
std::vector<cv::KeyPoint> fast_corners(const cv::Mat& gray, int t, int border) {
  std::vector<cv::KeyPoint> out;
  for (int y = border; y < gray.rows - border; ++y) {
    const std::uint8_t* row = gray.ptr<std::uint8_t>(y);
    for (int x = border; x < gray.cols - border; ++x) {
      const int c = row[x];
      int v[16];
      for (int k = 0; k < 16; ++k) v[k] = gray.at<std::uint8_t>(y + kCircle[k][1], x + kCircle[k][0]);
      // Any 9-arc contains at least two of the four compass pixels.
      int bright = 0, dark = 0;
      for (int k = 0; k < 16; k += 4) bright += v[k] > c + t, dark += v[k] < c - t;
      if (bright < 2 && dark < 2) continue;
      bool corner = false;
      for (int sign : {1, -1}) {
        int run = 0;
        for (int k = 0; k < 32 && !corner; ++k) {
          const int d = sign * (v[k % 16] - c);
          run = d > t ? run + 1 : 0;
          corner = run >= 9;
        }
      }
      if (!corner) continue;
      int score = 0;
      for (int k = 0; k < 16; ++k) score += std::max(0, std::abs(v[k] - c) - t);
      out.emplace_back(static_cast<float>(x), static_cast<float>(y), 31.0f, -1.0f, static_cast<float>(score));
    }
  }
  return out;
}

}  // namespace

void LocalFeatureSet::validate() const {
  const std::size_t n = keypoints.size();
  if (scores.size() != n) throw DataError("feature set: score count differs from keypoint count");
  if (kind == DescriptorKind::kBinary && binary.size() != n * dim) throw DataError("feature set: descriptor size");
  if (kind == DescriptorKind::kFloat && real.size() != n * dim) throw DataError("feature set: descriptor size");
}

void normalize_descriptor(std::vector<float>& v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (sq <= 0.0 || !std::isfinite(sq)) {
    std::fill(v.begin(), v.end(), static_cast<float>(1.0 / std::sqrt(static_cast<double>(v.size()))));
    return;
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x * inv);
}

GlobalDescriptor builtin_global_descriptor(const RgbImage& img) {
  if (img.width() < 64 || img.height() < 64) throw DataError("global descriptor needs an image of at least 64x64");
  cv::Mat small;
  cv::resize(gray_mat(img), small, cv::Size(64, 64), 0, 0, cv::INTER_AREA);
  small.convertTo(small, CV_32F);
  constexpr int kBins = 8;
  constexpr int kCells = 8;
  std::vector<double> acc(kBuiltinGlobalDim, 0.0);
  auto bin_at = [&](int cy, int cx, int b) -> double& { return acc[(cy * kCells + cx) * kBins + b]; };
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const float gx = small.at<float>(y, std::min(x + 1, 63)) - small.at<float>(y, std::max(x - 1, 0));
      const float gy = small.at<float>(std::min(y + 1, 63), x) - small.at<float>(std::max(y - 1, 0), x);
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double angle = std::atan2(gy, gx);
      if (angle < 0.0) angle += 2.0 * std::numbers::pi;
      const double pos = angle / (2.0 * std::numbers::pi) * kBins;
      const int b0 = static_cast<int>(std::floor(pos)) % kBins;
      const int b1 = (b0 + 1) % kBins;
      const double frac = pos - std::floor(pos);
      // Bilinear weights onto the four nearest cell centres; weight past the border is dropped.
      const double fy = (y + 0.5) / 8.0 - 0.5, fx = (x + 0.5) / 8.0 - 0.5;
      const int y0 = static_cast<int>(std::floor(fy)), x0 = static_cast<int>(std::floor(fx));
      const double wy[2] = {1.0 - (fy - y0), fy - y0};
      const double wx[2] = {1.0 - (fx - x0), fx - x0};
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int cy = y0 + dy, cx = x0 + dx;
          if (cy < 0 || cx < 0 || cy >= kCells || cx >= kCells) continue;
          const double w = wy[dy] * wx[dx] * mag;
          bin_at(cy, cx, b0) += w * (1.0 - frac);
          bin_at(cy, cx, b1) += w * frac;
        }
      }
    }
  }
  // Binomial [1 4 6 4 1] / 16 across neighbouring cells (edge replicated), per
  // bin and axis, so a small viewpoint change moves energy between cells gradually.
  constexpr double kTaps[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  for (int axis = 0; axis < 2; ++axis) {
    std::vector<double> out(acc.size(), 0.0);
    for (int cy = 0; cy < kCells; ++cy) {
      for (int cx = 0; cx < kCells; ++cx) {
        for (int k = -2; k <= 2; ++k) {
          const int sy = axis == 0 ? std::clamp(cy + k, 0, kCells - 1) : cy;
          const int sx = axis == 1 ? std::clamp(cx + k, 0, kCells - 1) : cx;
          for (int b = 0; b < kBins; ++b) out[(cy * kCells + cx) * kBins + b] += kTaps[k + 2] * bin_at(sy, sx, b);
        }
      }
    }
    acc.swap(out);
  }
  std::vector<float> hist(acc.size());
  // Square-rooted bins keep the strong perspective edges of corridors from
  // drowning out the weaker wall texture.
  for (std::size_t i = 0; i < acc.size(); ++i) hist[i] = static_cast<float>(std::sqrt(acc[i]));
  normalize_descriptor(hist);
  return {std::move(hist), "builtin"};
}

LocalFeatureSet builtin_detect(const RgbImage& img, const DetectorOptions& options) {
  if (img.width() < 32 || img.height() < 32) throw DataError("local features need an image of at least 32x32");
  LocalFeatureSet out;
  out.provider = "builtin";
  const cv::Mat gray = gray_mat(img);
  // Descriptors sample a radius-15 patch; keep corners where it fits.
  constexpr int kBorder = 16;
  std::vector<cv::KeyPoint> corners = fast_corners(gray, options.fast_threshold, kBorder);
  std::sort(corners.begin(), corners.end(), [](const cv::KeyPoint& a, const cv::KeyPoint& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.pt.y != b.pt.y) return a.pt.y < b.pt.y;
    return a.pt.x < b.pt.x;
  });

  // Greedy radius suppression over a bucket grid.
  const double r = options.nms_radius;
  const int cell = std::max(1, static_cast<int>(std::ceil(r)));
  const int gw = gray.cols / cell + 1, gh = gray.rows / cell + 1;
  std::vector<std::vector<cv::Point2f>> buckets(static_cast<std::size_t>(gw) * gh);
  std::vector<cv::KeyPoint> kept;
  for (const auto& k : corners) {
    if (static_cast<int>(kept.size()) >= options.max_features) break;
    const int bx = static_cast<int>(k.pt.x) / cell, by = static_cast<int>(k.pt.y) / cell;
    bool suppressed = false;
    for (int y = std::max(0, by - 1); y <= std::min(gh - 1, by + 1) && !suppressed; ++y)
      for (int x = std::max(0, bx - 1); x <= std::min(gw - 1, bx + 1) && !suppressed; ++x)
        for (const auto& p : buckets[static_cast<std::size_t>(y) * gw + x])
          if (std::hypot(p.x - k.pt.x, p.y - k.pt.y) <= r) {
            suppressed = true;
            break;
          }
    if (suppressed) continue;
    buckets[static_cast<std::size_t>(by) * gw + bx].push_back(k.pt);
    kept.push_back(k);
  }

  // Intensity-centroid orientation over a radius-15 disc.
  constexpr int kRadius = 15;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    auto& k = kept[i];
    const int cx = static_cast<int>(k.pt.x), cy = static_cast<int>(k.pt.y);
    double m01 = 0.0, m10 = 0.0;
    for (int dy = -kRadius; dy <= kRadius; ++dy)
      for (int dx = -kRadius; dx <= kRadius; ++dx) {
        if (dx * dx + dy * dy > kRadius * kRadius) continue;
        const double v = gray.at<std::uint8_t>(cy + dy, cx + dx);
        m10 += dx * v;
        m01 += dy * v;
      }
    k.angle = static_cast<float>(std::atan2(m01, m10) * 180.0 / std::numbers::pi);
    if (k.angle < 0) k.angle += 360.0f;
    k.size = 31.0f;
    k.octave = 0;
    k.class_id = static_cast<int>(i);
  }

  cv::Mat desc;
  if (!kept.empty()) {
    auto orb = cv::ORB::create(options.max_features, 1.2f, 1, kBorder, 0, 2, cv::ORB::FAST_SCORE, 31,
                               options.fast_threshold);
    orb->compute(gray, kept, desc);
  }
  out.kind = DescriptorKind::kBinary;
  out.dim = kBinaryDescriptorBytes;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto& k = kept[i];
    out.keypoints.emplace_back(k.pt.x + 0.5, k.pt.y + 0.5);
    out.scores.push_back(std::clamp(k.response / (16.0f * 255.0f), 0.0f, 1.0f));
    const std::uint8_t* row = desc.ptr<std::uint8_t>(static_cast<int>(i));
    out.binary.insert(out.binary.end(), row, row + kBinaryDescriptorBytes);
  }
  return out;
}

namespace {

struct Best {
  double d1 = std::numeric_limits<double>::infinity();
  double d2 = std::numeric_limits<double>::infinity();
  int index = -1;
  void offer(double d, int i) {
    if (d < d1) {
      d2 = d1;
      d1 = d;
      index = i;
    } else if (d < d2) {
      d2 = d;
    }
  }
};

template <typename Dist>
MatchSet match_with(std::size_t na, std::size_t nb, double ratio, Dist&& dist) {
  std::vector<Best> ab(na), ba(nb);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const double d = dist(i, j);
      ab[i].offer(d, static_cast<int>(j));
      ba[j].offer(d, static_cast<int>(i));
    }
  }
  MatchSet out;
  for (std::size_t i = 0; i < na; ++i) {
    const Best& b = ab[i];
    if (b.index < 0 || ba[b.index].index != static_cast<int>(i)) continue;
    if (!(b.d1 < ratio * b.d2)) continue;
    const double omega = std::isinf(b.d2) ? 1.0 : 1.0 - b.d1 / (b.d2 + 1e-9);
    out.pairs.push_back({static_cast<int>(i), b.index, std::clamp(omega, 0.0, 1.0)});
  }
  return out;
}

}  // namespace

MatchSet match_features(const LocalFeatureSet& a, const LocalFeatureSet& b, double ratio) {
  if (a.kind != b.kind || a.dim != b.dim) throw std::invalid_argument("cannot match descriptors of different types");
  if (a.kind == DescriptorKind::kBinary) {
    const std::size_t words = static_cast<std::size_t>(a.dim) / 8;
    return match_with(a.size(), b.size(), ratio, [&](std::size_t i, std::size_t j) {
      const std::uint8_t* p = a.binary.data() + i * a.dim;
      const std::uint8_t* q = b.binary.data() + j * b.dim;
      int d = 0;
      std::size_t k = 0;
      for (; k < words; ++k) {
        std::uint64_t x, y;
        std::memcpy(&x, p + 8 * k, 8);
        std::memcpy(&y, q + 8 * k, 8);
        d += std::popcount(x ^ y);
      }
      for (k *= 8; k < static_cast<std::size_t>(a.dim); ++k) d += std::popcount(static_cast<unsigned>(p[k] ^ q[k]));
      return static_cast<double>(d);
    });
  }
  return match_with(a.size(), b.size(), ratio, [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (int k = 0; k < a.dim; ++k) {
      const double d = a.real[i * a.dim + k] - b.real[j * b.dim + k];
      s += d * d;
    }
    return std::sqrt(s);
  });
}

double descriptor_distance(const GlobalDescriptor& a, const GlobalDescriptor& b) {
  if (a.values.size() != b.values.size()) throw std::invalid_argument("descriptor lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = static_cast<double>(a.values[i]) - b.values[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace synthloc
