#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synthloc/features/provider.hpp"
#include "synthloc/geom/camera.hpp"
#include "synthloc/geom/image.hpp"
#include "synthloc/locdb/kdtree.hpp"
#include "synthloc/render/dataset.hpp"

namespace synthloc {

struct DatabaseEntry {
  int id = 0;
  double timestamp = 0.0;
  Pose pose;  // T_WM, camera-to-world of the render
  std::filesystem::path rgb;    // absolute or relative to the working directory
  std::filesystem::path depth;
  LocalFeatureSet features;
};

struct BuildReport {
  std::size_t built = 0;
  std::vector<std::pair<int, std::string>> skipped;  // entry id, reason
};

// Entries sorted by id; row i of `descriptors` belongs to entries[i]. The
// KD-tree is immutable after construction, so concurrent queries are safe.
class LocalizationDatabase {
 public:
  LocalizationDatabase() = default;
  LocalizationDatabase(CameraModel cam, std::string global_provider, std::string local_provider,
                       std::vector<DatabaseEntry> entries, std::vector<float> descriptors, std::size_t dim);

  const CameraModel& camera() const { return cam_; }
  const std::string& global_provider() const { return global_provider_; }
  const std::string& local_provider() const { return local_provider_; }
  const std::vector<DatabaseEntry>& entries() const { return entries_; }
  const DatabaseEntry& entry(std::size_t i) const { return entries_[i]; }
  std::size_t size() const { return entries_.size(); }
  std::size_t dim() const { return dim_; }
  std::span<const float> descriptor(std::size_t i) const { return {descriptors_.data() + i * dim_, dim_}; }
  const std::vector<float>& descriptors() const { return descriptors_; }

  // Median distance from each render position to its nearest distinct neighbour.
  double pose_spacing() const;

  // Exact k nearest rows by Euclidean distance; ids index entries().
  // Ties go to the lower entry id; k > size() returns size() results.
  std::vector<Neighbor> query_nearest(std::span<const float> descriptor, std::size_t k = 1) const;

  DepthImage load_depth(std::size_t i) const;

 private:
  CameraModel cam_;
  std::string global_provider_;
  std::string local_provider_;
  std::vector<DatabaseEntry> entries_;
  std::vector<float> descriptors_;
  std::size_t dim_ = 0;
  KdTree index_;
};

inline constexpr const char* kDatabaseIndexName = "db.json";
inline constexpr const char* kDescriptorBlobName = "descriptors.bin";

// Computes descriptors and local features for every manifest entry (parallel)
// and writes the database into `out_dir`. Unreadable entries are skipped with a
// warning and listed in the report; throws DataError("empty database") if none survive.
LocalizationDatabase build_database(const RenderManifest& manifest, GlobalProvider& global, LocalProvider& local,
                                    const std::filesystem::path& out_dir, unsigned jobs = 0,
                                    BuildReport* report = nullptr);

// db.json stores image paths relative to `dir`, so the database and its renders move together.
void save_database(const LocalizationDatabase& db, const std::filesystem::path& dir);

// Throws DataError on missing or inconsistent files, or when `expected_cam` differs from the stored camera.
LocalizationDatabase load_database(const std::filesystem::path& dir,
                                   const std::optional<CameraModel>& expected_cam = std::nullopt);

void write_feature_file(const std::filesystem::path& path, const LocalFeatureSet& features);
LocalFeatureSet read_feature_file(const std::filesystem::path& path);

}  // namespace synthloc
