#include "synthloc/localize/localize.hpp"

#include <chrono>
#include <cmath>

#include "synthloc/error.hpp"

namespace synthloc {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

LocalizationResult failed(const char* reason, const char* stage) {
  LocalizationResult r;
  r.status = LocalizationStatus::kFailed;
  r.reason = reason;
  r.stage = stage;
  return r;
}

}  // namespace

const char* status_name(LocalizationStatus s) {
  switch (s) {
    case LocalizationStatus::kLocalized: return "localized";
    case LocalizationStatus::kRetrievalOnly: return "retrieval-only";
    case LocalizationStatus::kFailed: return "failed";
  }
  return "?";
}

float lookup_depth(const DepthImage& depth, const Eigen::Vector2d& uv) {
  const int x = static_cast<int>(std::floor(uv.x()));
  const int y = static_cast<int>(std::floor(uv.y()));
  auto valid = [&](int px, int py) {
    return px >= 0 && py >= 0 && px < depth.width() && py < depth.height() && depth.at(px, py) > 0.0f;
  };
  if (valid(x, y)) return depth.at(x, y);
  // Nearest by distance from the keypoint to the neighbour's centre; scan order breaks ties.
  float best = 0.0f;
  double best_d = std::numeric_limits<double>::infinity();
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (!valid(x + dx, y + dy)) continue;
      const double d = Eigen::Vector2d(x + dx + 0.5 - uv.x(), y + dy + 0.5 - uv.y()).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = depth.at(x + dx, y + dy);
      }
    }
  }
  return best;
}

LocalizationResult estimate_pose(const MatchSet& matches, const LocalFeatureSet& reference,
                                 const LocalFeatureSet& query, const DepthImage& depth, const CameraModel& cam,
                                 const Pose& T_WR, const LocalizeOptions& options) {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector2d> pixels;
  for (const auto& m : matches.pairs) {
    if (!(m.confidence > options.min_confidence)) continue;
    const auto& r = reference.keypoints.at(static_cast<std::size_t>(m.reference));
    const float z = lookup_depth(depth, r);
    if (z <= 0.0f) continue;
    points.push_back(backproject(r.x(), r.y(), z, cam));
    pixels.push_back(query.keypoints.at(static_cast<std::size_t>(m.query)));
  }
  LocalizationResult out;
  out.correspondences = static_cast<int>(points.size());
  out.entry_pose = T_WR;
  if (out.correspondences < options.min_correspondences) {
    auto f = failed("insufficient-matches", "pose");
    f.correspondences = out.correspondences;
    f.entry_pose = T_WR;
    return f;
  }
  const PnpResult pnp = solve_pnp_ransac(points, pixels, cam, options.ransac);
  out.inliers = static_cast<int>(pnp.inliers.size());
  if (!pnp.ok || out.inliers < options.min_inliers || !pnp.pose.matrix().allFinite()) {
    auto f = failed("degenerate", "pose");
    f.correspondences = out.correspondences;
    f.inliers = out.inliers;
    f.entry_pose = T_WR;
    return f;
  }
  // pnp.pose maps reference-camera points into the query camera: T_QR.
  out.status = LocalizationStatus::kLocalized;
  out.pose = T_WR * pnp.pose.inverse();
  out.reprojection_error = pnp.mean_error_px;
  return out;
}

LocalizationResult localize_image(const LocalizationDatabase& db, GlobalProvider& global, LocalProvider& local,
                                  const RgbImage& img, const LocalizeOptions& options,
                                  const std::filesystem::path& source) {
  if (img.width() != db.camera().width || img.height() != db.camera().height) {
    throw DataError("query image is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                    ", database camera is " + std::to_string(db.camera().width) + "x" +
                    std::to_string(db.camera().height));
  }
  StageTimings timings;
  const auto start = Clock::now();

  auto t0 = Clock::now();
  const GlobalDescriptor g = global.describe(img, source);
  timings.global_ms = ms_since(t0);

  t0 = Clock::now();
  const std::size_t k = options.retrieval_only ? 1 : static_cast<std::size_t>(std::max(options.rerank, 1));
  const auto nearest = db.query_nearest(g.values, k);
  timings.retrieval_ms = ms_since(t0);
  const auto& top = db.entry(nearest.front().id);

  LocalizationResult best;
  if (options.retrieval_only) {
    best.status = LocalizationStatus::kRetrievalOnly;
    best.pose = top.pose;
    best.entry_pose = top.pose;
    best.entry_id = top.id;
  } else {
    t0 = Clock::now();
    const LocalFeatureSet qf = local.detect(img, source);
    timings.local_ms = ms_since(t0);
    bool have = false;
    for (const auto& nb : nearest) {
      const auto& entry = db.entry(nb.id);
      t0 = Clock::now();
      const MatchSet matches = local.match(qf, entry.features, options.ratio);
      timings.matching_ms += ms_since(t0);
      t0 = Clock::now();
      auto r = estimate_pose(matches, entry.features, qf, db.load_depth(nb.id), db.camera(), entry.pose, options);
      timings.pose_ms += ms_since(t0);
      r.entry_id = entry.id;
      const bool better = !have || (r.status == LocalizationStatus::kLocalized &&
                                    (best.status != LocalizationStatus::kLocalized || r.inliers > best.inliers));
      if (better) {
        best = std::move(r);
        have = true;
      }
    }
  }
  timings.total_ms = ms_since(start);
  best.timings = timings;
  return best;
}

}  // namespace synthloc
