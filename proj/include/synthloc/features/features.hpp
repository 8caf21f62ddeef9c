#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "synthloc/geom/image.hpp"

namespace synthloc {

struct GlobalDescriptor {
  std::vector<float> values;  // unit L2 norm
  std::string provider;
};

inline constexpr int kBuiltinGlobalDim = 512;
inline constexpr int kBinaryDescriptorBytes = 32;

enum class DescriptorKind { kBinary, kFloat };

struct LocalFeatureSet {
  std::vector<Eigen::Vector2d> keypoints;  // continuous image coordinates
  std::vector<float> scores;               // [0, 1]
  DescriptorKind kind = DescriptorKind::kBinary;
  int dim = kBinaryDescriptorBytes;  // bytes for binary, floats otherwise
  std::vector<std::uint8_t> binary;  // size() * dim
  std::vector<float> real;           // size() * dim
  std::string provider;

  std::size_t size() const { return keypoints.size(); }
  // Throws DataError when field counts disagree.
  void validate() const;
};

struct Match {
  int query;
  int reference;
  double confidence;  // omega in [0, 1]
};

struct MatchSet {
  std::vector<Match> pairs;
};

// Grayscale, 64x64 area resize, 8x8 cells of 8-bin signed gradient-orientation
// histograms (magnitude weighted, linear in angle and bilinear in position),
// smoothed across cells with a 5-tap binomial, square-rooted, concatenated and L2 normalized.
// A gradient-free image yields the uniform unit vector. Throws DataError below 64x64.
GlobalDescriptor builtin_global_descriptor(const RgbImage& img);

struct DetectorOptions {
  int max_features = 1024;
  int fast_threshold = 20;
  double nms_radius = 5.0;
};

// FAST-9/16 corners, radius non-max suppression, intensity-centroid orientation
// and 256-bit rotated BRIEF with the ORB sampling pattern. Throws DataError below 32x32.
LocalFeatureSet builtin_detect(const RgbImage& img, const DetectorOptions& options = {});

// Nearest and second-nearest by Hamming (binary) or Euclidean (float) distance;
// a pair survives if d1 < ratio * d2 and it is mutual-best. omega = 1 - d1 / (d2 + 1e-9).
// Throws std::invalid_argument when descriptor types or lengths differ.
MatchSet match_features(const LocalFeatureSet& a, const LocalFeatureSet& b, double ratio = 0.8);

double descriptor_distance(const GlobalDescriptor& a, const GlobalDescriptor& b);

// Rescales to unit norm; an all-zero vector becomes uniform.
void normalize_descriptor(std::vector<float>& v);

}  // namespace synthloc
