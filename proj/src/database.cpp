#include "synthloc/locdb/database.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>

#include <spdlog/spdlog.h>

#include "synthloc/error.hpp"
#include "synthloc/io/json_io.hpp"
#include "synthloc/parallel.hpp"

namespace synthloc {

namespace fs = std::filesystem;

namespace {

constexpr char kFeatureMagic[4] = {'S', 'L', 'F', '1'};

template <typename T>
void put(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void get(std::ifstream& f, T& v) {
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
}

std::string relative_to(const fs::path& p, const fs::path& dir) {
  return fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(dir).lexically_normal()).generic_string();
}

}  // namespace

void write_feature_file(const fs::path& path, const LocalFeatureSet& features) {
  features.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f.write(kFeatureMagic, 4);
  put(f, static_cast<std::uint32_t>(features.size()));
  put(f, static_cast<std::uint32_t>(features.kind == DescriptorKind::kBinary ? 0 : 1));
  put(f, static_cast<std::uint32_t>(features.dim));
  put(f, static_cast<std::uint32_t>(features.provider.size()));
  f.write(features.provider.data(), static_cast<std::streamsize>(features.provider.size()));
  for (const auto& k : features.keypoints) {
    put(f, k.x());
    put(f, k.y());
  }
  f.write(reinterpret_cast<const char*>(features.scores.data()),
          static_cast<std::streamsize>(features.scores.size() * sizeof(float)));
  if (features.kind == DescriptorKind::kBinary) {
    f.write(reinterpret_cast<const char*>(features.binary.data()), static_cast<std::streamsize>(features.binary.size()));
  } else {
    f.write(reinterpret_cast<const char*>(features.real.data()),
            static_cast<std::streamsize>(features.real.size() * sizeof(float)));
  }
  if (!f) throw DataError("failed writing " + path.string());
}

LocalFeatureSet read_feature_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kFeatureMagic, 4) != 0) throw DataError("not a feature file: " + path.string());
  std::uint32_t n = 0, kind = 0, dim = 0, name_len = 0;
  get(f, n);
  get(f, kind);
  get(f, dim);
  get(f, name_len);
  if (!f || kind > 1 || dim == 0 || dim > 65536 || name_len > 4096 || n > (1u << 24)) {
    throw DataError("corrupt feature header: " + path.string());
  }
  LocalFeatureSet out;
  out.kind = kind == 0 ? DescriptorKind::kBinary : DescriptorKind::kFloat;
  out.dim = static_cast<int>(dim);
  out.provider.resize(name_len);
  f.read(out.provider.data(), name_len);
  out.keypoints.resize(n);
  for (auto& k : out.keypoints) {
    get(f, k.x());
    get(f, k.y());
  }
  out.scores.resize(n);
  f.read(reinterpret_cast<char*>(out.scores.data()), static_cast<std::streamsize>(n * sizeof(float)));
  const std::size_t count = static_cast<std::size_t>(n) * dim;
  if (out.kind == DescriptorKind::kBinary) {
    out.binary.resize(count);
    f.read(reinterpret_cast<char*>(out.binary.data()), static_cast<std::streamsize>(count));
  } else {
    out.real.resize(count);
    f.read(reinterpret_cast<char*>(out.real.data()), static_cast<std::streamsize>(count * sizeof(float)));
  }
  if (!f) throw DataError("truncated feature file: " + path.string());
  return out;
}

LocalizationDatabase::LocalizationDatabase(CameraModel cam, std::string global_provider, std::string local_provider,
                                           std::vector<DatabaseEntry> entries, std::vector<float> descriptors,
                                           std::size_t dim)
    : cam_(cam),
      global_provider_(std::move(global_provider)),
      local_provider_(std::move(local_provider)),
      entries_(std::move(entries)),
      descriptors_(std::move(descriptors)),
      dim_(dim) {
  if (entries_.empty()) throw DataError("empty database");
  if (dim_ == 0 || descriptors_.size() != entries_.size() * dim_) {
    throw DataError("descriptor blob does not match the entry count");
  }
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    if (entries_[i].id <= entries_[i - 1].id) throw DataError("database entry ids must be strictly increasing");
  }
  index_ = KdTree(descriptors_, dim_);
}

double LocalizationDatabase::pose_spacing() const {
  std::vector<double> nearest;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < entries_.size(); ++j) {
      const double d = (entries_[i].pose.translation() - entries_[j].pose.translation()).norm();
      if (d > 1e-6) best = std::min(best, d);
    }
    if (std::isfinite(best)) nearest.push_back(best);
  }
  if (nearest.empty()) return 0.0;
  std::nth_element(nearest.begin(), nearest.begin() + nearest.size() / 2, nearest.end());
  return nearest[nearest.size() / 2];
}

std::vector<Neighbor> LocalizationDatabase::query_nearest(std::span<const float> descriptor, std::size_t k) const {
  if (descriptor.size() != dim_) {
    throw DataError("query descriptor has length " + std::to_string(descriptor.size()) + ", database uses " +
                    std::to_string(dim_));
  }
  return index_.knn(descriptor, std::max<std::size_t>(k, 1));
}

DepthImage LocalizationDatabase::load_depth(std::size_t i) const { return read_depth_png(entries_[i].depth); }

void save_database(const LocalizationDatabase& db, const fs::path& dir) {
  fs::create_directories(dir / "features");
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < db.size(); ++i) {
    const auto& e = db.entry(i);
    char name[40];
    std::snprintf(name, sizeof name, "features/%06d.bin", e.id);
    write_feature_file(dir / name, e.features);
    entries.push_back({{"id", e.id},
                       {"timestamp", e.timestamp},
                       {"pose", pose_to_json(e.pose)},
                       {"rgb", relative_to(e.rgb, dir)},
                       {"depth", relative_to(e.depth, dir)},
                       {"features", name}});
  }
  const nlohmann::json j{{"version", 1},
                         {"camera", camera_to_json(db.camera())},
                         {"providers", {{"global", db.global_provider()}, {"local", db.local_provider()}}},
                         {"descriptor_dim", db.dim()},
                         {"descriptors", kDescriptorBlobName},
                         {"entries", entries}};
  write_json_file(dir / kDatabaseIndexName, j);
  std::ofstream blob(dir / kDescriptorBlobName, std::ios::binary);
  blob.write(reinterpret_cast<const char*>(db.descriptors().data()),
             static_cast<std::streamsize>(db.descriptors().size() * sizeof(float)));
  if (!blob) throw DataError("failed writing " + (dir / kDescriptorBlobName).string());
}

LocalizationDatabase load_database(const fs::path& dir, const std::optional<CameraModel>& expected_cam) {
  const fs::path index = dir / kDatabaseIndexName;
  if (!fs::exists(index)) throw DataError("database index not found: " + index.string());
  const auto j = read_json_file(index);
  CameraModel cam;
  std::string global_id, local_id;
  std::size_t dim = 0;
  std::vector<DatabaseEntry> entries;
  try {
    cam = camera_from_json(j.at("camera"));
    global_id = j.at("providers").at("global").get<std::string>();
    local_id = j.at("providers").at("local").get<std::string>();
    dim = j.at("descriptor_dim").get<std::size_t>();
    for (const auto& e : j.at("entries")) {
      DatabaseEntry entry;
      entry.id = e.at("id").get<int>();
      entry.timestamp = e.at("timestamp").get<double>();
      entry.pose = pose_from_json(e.at("pose"));
      entry.rgb = (dir / e.at("rgb").get<std::string>()).lexically_normal();
      entry.depth = (dir / e.at("depth").get<std::string>()).lexically_normal();
      entry.features = read_feature_file(dir / e.at("features").get<std::string>());
      if (!fs::exists(entry.depth)) throw DataError("database depth image missing: " + entry.depth.string());
      entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(index.string() + ": malformed database index: " + ex.what());
  }
  if (expected_cam && !(*expected_cam == cam)) {
    throw DataError("query camera model differs from the database camera in " + index.string());
  }
  const fs::path blob_path = dir / j.value("descriptors", std::string(kDescriptorBlobName));
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw DataError("cannot open " + blob_path.string());
  std::vector<float> descriptors(entries.size() * dim);
  blob.read(reinterpret_cast<char*>(descriptors.data()), static_cast<std::streamsize>(descriptors.size() * sizeof(float)));
  if (!blob || blob.peek() != std::char_traits<char>::eof()) {
    throw DataError("descriptor blob size mismatch: " + blob_path.string());
  }
  return LocalizationDatabase(cam, global_id, local_id, std::move(entries), std::move(descriptors), dim);
}

LocalizationDatabase build_database(const RenderManifest& manifest, GlobalProvider& global, LocalProvider& local,
                                    const fs::path& out_dir, unsigned jobs, BuildReport* report) {
  if (manifest.entries.empty()) throw DataError("empty database");
  std::vector<std::size_t> order(manifest.entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return manifest.entries[a].id < manifest.entries[b].id; });

  struct Slot {
    std::optional<DatabaseEntry> entry;
    std::vector<float> descriptor;
    std::string error;
  };
  std::vector<Slot> slots(order.size());
  parallel_for(order.size(), jobs, [&](std::size_t k) {
    const std::size_t i = order[k];
    const auto& m = manifest.entries[i];
    Slot& slot = slots[k];
    try {
      const auto rgb_path = manifest.rgb_path(i);
      const auto depth_path = manifest.depth_path(i);
      const RgbImage img = read_rgb_png(rgb_path);
      const DepthImage depth = read_depth_png(depth_path);
      if (img.width() != manifest.cam.width || img.height() != manifest.cam.height ||
          depth.width() != img.width() || depth.height() != img.height()) {
        throw DataError("image size does not match the manifest camera");
      }
      auto g = global.describe(img, rgb_path);
      DatabaseEntry e;
      e.id = m.id;
      e.timestamp = m.timestamp;
      e.pose = m.pose;
      e.rgb = rgb_path;
      e.depth = depth_path;
      e.features = local.detect(img, rgb_path);
      slot.descriptor = std::move(g.values);
      slot.entry = std::move(e);
    } catch (const PluginError&) {
      throw;
    } catch (const std::exception& ex) {
      slot.error = ex.what();
    }
  });

  BuildReport local_report;
  std::vector<DatabaseEntry> entries;
  std::vector<float> descriptors;
  std::size_t dim = 0;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    auto& slot = slots[k];
    const int id = manifest.entries[order[k]].id;
    if (!slot.entry) {
      spdlog::warn("skipping database entry {}: {}", id, slot.error);
      local_report.skipped.emplace_back(id, slot.error);
      continue;
    }
    if (dim == 0) dim = slot.descriptor.size();
    if (slot.descriptor.size() != dim) {
      throw DataError("global descriptor length changed within one database (" + std::to_string(dim) + " vs " +
                      std::to_string(slot.descriptor.size()) + ")");
    }
    descriptors.insert(descriptors.end(), slot.descriptor.begin(), slot.descriptor.end());
    entries.push_back(std::move(*slot.entry));
  }
  local_report.built = entries.size();
  if (report) *report = local_report;
  if (entries.empty()) throw DataError("empty database");

  LocalizationDatabase db(manifest.cam, global.id(), local.id(), std::move(entries), std::move(descriptors), dim);
  save_database(db, out_dir);
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& [id, why] : local_report.skipped) skipped.push_back({{"id", id}, {"reason", why}});
  write_json_file(out_dir / "build_report.json", {{"built", local_report.built}, {"skipped", skipped}});
  // Reload so the in-memory paths match what a later load_database yields.
  return load_database(out_dir);
}

}  // namespace synthloc
