#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "synthloc/geom/trajectory.hpp"
#include "synthloc/localize/localize.hpp"

namespace synthloc {

struct Thresholds {
  double max_translation = 1.0;  // meters
  double max_rotation = 30.0;    // degrees
  // Throws ConfigError unless both are positive.
  void validate() const;
};

inline constexpr Thresholds kIndoorThresholds{1.0, 30.0};
inline constexpr Thresholds kOutdoorThresholds{2.0, 30.0};

struct PoseError {
  double translation = 0.0;  // meters
  double rotation = 0.0;     // degrees
};

// Translation distance and the angle of R_gt^-1 R_est.
PoseError pose_error(const Pose& est, const Pose& gt);

// Angle between the optical axes (camera +z) of two camera-to-world poses, degrees.
double view_angle_deg(const Pose& a, const Pose& b);

struct QueryRecord {
  std::string image;
  double timestamp = 0.0;
  LocalizationResult result;
};

struct ResultsFile {
  std::string database;  // directory the queries ran against
  std::size_t database_size = 0;
  double database_spacing = 0.0;  // meters between neighbouring render positions
  std::vector<QueryRecord> queries;
};

void write_results(const std::filesystem::path& path, const ResultsFile& results);
ResultsFile read_results(const std::filesystem::path& path);

struct RetrievalCriterion {
  double max_dist = 4.0;            // meters
  double max_view_angle = 60.0;     // degrees
};

// Index of the GT pose nearest in time, if within `tolerance` seconds.
std::optional<std::size_t> associate(const Trajectory& gt, double timestamp, double tolerance);

struct QueryScore {
  bool associated = false;
  bool retrieved = false;  // matched entry within the retrieval criterion
  bool localized = false;  // status localized, retrieved, and within thresholds
  PoseError error;         // of the reported pose; zero when failed
  Pose gt;
};

struct Evaluation {
  std::size_t total = 0;     // associated queries
  std::size_t excluded = 0;  // queries with no GT within tolerance
  std::size_t retrieved = 0;
  std::size_t localized = 0;
  double retrieval_rate = 0.0;     // percent
  double localization_rate = 0.0;  // percent
  std::vector<QueryScore> scores;  // one per query, in file order
};

// Throws DataError for an empty query set or when no query can be associated.
Evaluation evaluate(const ResultsFile& results, const Trajectory& gt, const Thresholds& thresholds,
                    const RetrievalCriterion& criterion, double time_tolerance = 0.05);

double localization_rate(const ResultsFile& results, const Trajectory& gt, const Thresholds& thresholds,
                         const RetrievalCriterion& criterion, double time_tolerance = 0.05);
double retrieval_rate(const ResultsFile& results, const Trajectory& gt, const RetrievalCriterion& criterion,
                      double time_tolerance = 0.05);

// Per-query rows: image, timestamp, status, entry, errors, flags.
void write_eval_csv(const std::filesystem::path& path, const ResultsFile& results, const Evaluation& eval);
// Whitespace table "timestamp gt_x gt_y est_x est_y localized" for trajectory overlays.
void write_xy(const std::filesystem::path& path, const ResultsFile& results, const Evaluation& eval);
std::string format_table(const ResultsFile& results, const Evaluation& eval);

}  // namespace synthloc
