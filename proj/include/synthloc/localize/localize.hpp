#pragma once

#include <string>
#include <vector>

#include "synthloc/features/provider.hpp"
#include "synthloc/geom/image.hpp"
#include "synthloc/locdb/database.hpp"
#include "synthloc/localize/pnp.hpp"

namespace synthloc {

enum class LocalizationStatus { kLocalized, kRetrievalOnly, kFailed };
const char* status_name(LocalizationStatus s);

struct StageTimings {
  double global_ms = 0.0;
  double retrieval_ms = 0.0;
  double local_ms = 0.0;
  double matching_ms = 0.0;
  double pose_ms = 0.0;
  double total_ms = 0.0;
};

struct LocalizationResult {
  LocalizationStatus status = LocalizationStatus::kFailed;
  std::string reason;  // "insufficient-matches" or "degenerate" when failed
  std::string stage;   // stage that failed
  Pose pose;           // T_WQ
  int entry_id = -1;   // matched database entry, -1 when none
  Pose entry_pose;     // T_WR of the matched entry
  int correspondences = 0;
  int inliers = 0;
  double reprojection_error = 0.0;  // mean over inliers, pixels
  StageTimings timings;
};

struct LocalizeOptions {
  double min_confidence = 0.2;  // matches need omega > this
  int min_correspondences = 6;
  int min_inliers = 12;
  double ratio = 0.8;
  RansacOptions ransac;
  int rerank = 1;               // > 1 tries the top-k entries and keeps the most inliers
  bool retrieval_only = false;  // skip pose estimation, report the entry pose
};

// Depth at the pixel containing `uv` (floor of the continuous coordinate), or
// the nearest valid value in its 3x3 neighbourhood; 0 when none is valid.
float lookup_depth(const DepthImage& depth, const Eigen::Vector2d& uv);

// Algorithm: back-project reference keypoints through `depth`, solve PnP for
// T_QR from the query keypoints, return T_WQ = T_WR * T_QR^-1.
LocalizationResult estimate_pose(const MatchSet& matches, const LocalFeatureSet& reference,
                                 const LocalFeatureSet& query, const DepthImage& depth, const CameraModel& cam,
                                 const Pose& T_WR, const LocalizeOptions& options = {});

// Retrieval, local matching and pose estimation for one query image. The
// database is only read, so calls may run concurrently.
LocalizationResult localize_image(const LocalizationDatabase& db, GlobalProvider& global, LocalProvider& local,
                                  const RgbImage& img, const LocalizeOptions& options = {},
                                  const std::filesystem::path& source = {});

}  // namespace synthloc
