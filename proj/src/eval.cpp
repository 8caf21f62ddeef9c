#include "synthloc/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

#include "synthloc/error.hpp"
#include "synthloc/io/json_io.hpp"

namespace synthloc {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

nlohmann::json tum_fields(const Pose& p) {
  const auto& t = p.translation();
  const auto& q = p.rotation();
  return {{"tx", t.x()}, {"ty", t.y()}, {"tz", t.z()}, {"qx", q.x()}, {"qy", q.y()}, {"qz", q.z()}, {"qw", q.w()}};
}

Pose from_tum_fields(const nlohmann::json& j) {
  return Pose::from_tum(j.at("tx").get<double>(), j.at("ty").get<double>(), j.at("tz").get<double>(),
                        j.at("qx").get<double>(), j.at("qy").get<double>(), j.at("qz").get<double>(),
                        j.at("qw").get<double>());
}

LocalizationStatus parse_status(const std::string& s) {
  if (s == "localized") return LocalizationStatus::kLocalized;
  if (s == "retrieval-only") return LocalizationStatus::kRetrievalOnly;
  if (s == "failed") return LocalizationStatus::kFailed;
  throw DataError("unknown localization status '" + s + "'");
}

}  // namespace

void Thresholds::validate() const {
  if (!(max_translation > 0.0) || !(max_rotation > 0.0)) throw ConfigError("thresholds must be positive");
}

PoseError pose_error(const Pose& est, const Pose& gt) {
  return {(est.translation() - gt.translation()).norm(),
          rotation_angle(gt.rotation().conjugate() * est.rotation()) * kDeg};
}

double view_angle_deg(const Pose& a, const Pose& b) {
  const Eigen::Vector3d za = a.rotation() * Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d zb = b.rotation() * Eigen::Vector3d::UnitZ();
  return std::atan2(za.cross(zb).norm(), za.dot(zb)) * kDeg;
}

void write_results(const std::filesystem::path& path, const ResultsFile& results) {
  nlohmann::json queries = nlohmann::json::array();
  for (const auto& q : results.queries) {
    const auto& r = q.result;
    nlohmann::json j{{"image", q.image},
                     {"timestamp", q.timestamp},
                     {"status", status_name(r.status)},
                     {"reason", r.reason},
                     {"stage", r.stage},
                     {"entry", r.entry_id},
                     {"correspondences", r.correspondences},
                     {"inliers", r.inliers},
                     {"reprojection_error", r.reprojection_error},
                     {"timings_ms",
                      {{"global", r.timings.global_ms},
                       {"retrieval", r.timings.retrieval_ms},
                       {"local", r.timings.local_ms},
                       {"matching", r.timings.matching_ms},
                       {"pose", r.timings.pose_ms},
                       {"total", r.timings.total_ms}}}};
    j["pose"] = r.status == LocalizationStatus::kFailed ? nlohmann::json(nullptr) : tum_fields(r.pose);
    j["entry_pose"] = r.entry_id >= 0 ? tum_fields(r.entry_pose) : nlohmann::json(nullptr);
    queries.push_back(std::move(j));
  }
  write_json_file(path, {{"database",
                          {{"dir", results.database},
                           {"size", results.database_size},
                           {"spacing", results.database_spacing}}},
                         {"queries", queries}});
}

ResultsFile read_results(const std::filesystem::path& path) {
  const auto j = read_json_file(path);
  ResultsFile out;
  try {
    const auto& db = j.at("database");
    out.database = db.value("dir", "");
    out.database_size = db.at("size").get<std::size_t>();
    out.database_spacing = db.at("spacing").get<double>();
    for (const auto& q : j.at("queries")) {
      QueryRecord rec;
      rec.image = q.value("image", "");
      rec.timestamp = q.at("timestamp").get<double>();
      auto& r = rec.result;
      r.status = parse_status(q.at("status").get<std::string>());
      r.reason = q.value("reason", "");
      r.stage = q.value("stage", "");
      r.entry_id = q.value("entry", -1);
      r.correspondences = q.value("correspondences", 0);
      r.inliers = q.value("inliers", 0);
      r.reprojection_error = q.value("reprojection_error", 0.0);
      if (!q.at("pose").is_null()) r.pose = from_tum_fields(q.at("pose"));
      if (q.contains("entry_pose") && !q.at("entry_pose").is_null()) r.entry_pose = from_tum_fields(q.at("entry_pose"));
      if (q.contains("timings_ms")) {
        const auto& t = q.at("timings_ms");
        r.timings = {t.value("global", 0.0), t.value("retrieval", 0.0), t.value("local", 0.0),
                     t.value("matching", 0.0), t.value("pose", 0.0), t.value("total", 0.0)};
      }
      out.queries.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(path.string() + ": malformed results: " + ex.what());
  }
  return out;
}

std::optional<std::size_t> associate(const Trajectory& gt, double timestamp, double tolerance) {
  if (gt.empty()) return std::nullopt;
  const auto it = std::lower_bound(gt.begin(), gt.end(), timestamp,
                                   [](const StampedPose& s, double t) { return s.timestamp < t; });
  std::optional<std::size_t> best;
  double best_dt = tolerance;
  for (auto c : {it, it == gt.begin() ? it : std::prev(it)}) {
    if (c == gt.end()) continue;
    const double dt = std::abs(c->timestamp - timestamp);
    if (dt <= best_dt && (!best || dt < best_dt || static_cast<std::size_t>(c - gt.begin()) < *best)) {
      best = static_cast<std::size_t>(c - gt.begin());
      best_dt = dt;
    }
  }
  return best;
}

Evaluation evaluate(const ResultsFile& results, const Trajectory& gt, const Thresholds& thresholds,
                    const RetrievalCriterion& criterion, double time_tolerance) {
  thresholds.validate();
  if (results.queries.empty()) throw DataError("empty query set");
  Evaluation ev;
  for (const auto& q : results.queries) {
    QueryScore s;
    const auto idx = associate(gt, q.timestamp, time_tolerance);
    if (!idx) {
      ++ev.excluded;
      ev.scores.push_back(s);
      continue;
    }
    s.associated = true;
    s.gt = gt[*idx].pose;
    const auto& r = q.result;
    if (r.entry_id >= 0) {
      s.retrieved = (r.entry_pose.translation() - s.gt.translation()).norm() <= criterion.max_dist &&
                    view_angle_deg(r.entry_pose, s.gt) < criterion.max_view_angle;
    }
    if (r.status != LocalizationStatus::kFailed) s.error = pose_error(r.pose, s.gt);
    s.localized = r.status == LocalizationStatus::kLocalized && s.retrieved &&
                  s.error.translation <= thresholds.max_translation && s.error.rotation <= thresholds.max_rotation;
    ++ev.total;
    ev.retrieved += s.retrieved;
    ev.localized += s.localized;
    ev.scores.push_back(s);
  }
  if (ev.total == 0) throw DataError("no query timestamp matches the ground truth within tolerance");
  ev.retrieval_rate = 100.0 * static_cast<double>(ev.retrieved) / static_cast<double>(ev.total);
  ev.localization_rate = 100.0 * static_cast<double>(ev.localized) / static_cast<double>(ev.total);
  return ev;
}

double localization_rate(const ResultsFile& results, const Trajectory& gt, const Thresholds& thresholds,
                         const RetrievalCriterion& criterion, double time_tolerance) {
  return evaluate(results, gt, thresholds, criterion, time_tolerance).localization_rate;
}

double retrieval_rate(const ResultsFile& results, const Trajectory& gt, const RetrievalCriterion& criterion,
                      double time_tolerance) {
  return evaluate(results, gt, kIndoorThresholds, criterion, time_tolerance).retrieval_rate;
}

void write_eval_csv(const std::filesystem::path& path, const ResultsFile& results, const Evaluation& eval) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << "image,timestamp,status,entry,inliers,translation_error_m,rotation_error_deg,associated,retrieved,localized\n";
  for (std::size_t i = 0; i < results.queries.size(); ++i) {
    const auto& q = results.queries[i];
    const auto& s = eval.scores[i];
    f << fmt::format("{},{:.6f},{},{},{},{:.6f},{:.6f},{},{},{}\n", q.image, q.timestamp, status_name(q.result.status),
                     q.result.entry_id, q.result.inliers, s.error.translation, s.error.rotation, int(s.associated),
                     int(s.retrieved), int(s.localized));
  }
}

void write_xy(const std::filesystem::path& path, const ResultsFile& results, const Evaluation& eval) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << "# timestamp gt_x gt_y est_x est_y localized\n";
  for (std::size_t i = 0; i < results.queries.size(); ++i) {
    const auto& s = eval.scores[i];
    if (!s.associated) continue;
    const auto& r = results.queries[i].result;
    const bool has_est = r.status != LocalizationStatus::kFailed;
    f << fmt::format("{:.6f} {:.6f} {:.6f} ", results.queries[i].timestamp, s.gt.translation().x(),
                     s.gt.translation().y());
    if (has_est) {
      f << fmt::format("{:.6f} {:.6f} ", r.pose.translation().x(), r.pose.translation().y());
    } else {
      f << "nan nan ";
    }
    f << int(s.localized) << '\n';
  }
}

std::string format_table(const ResultsFile& results, const Evaluation& eval) {
  std::string out;
  out += fmt::format("{:<10} {:>10} {:>16} {:>20}\n", "queries", "DB size", "retrieval rate", "localization rate");
  out += fmt::format("{:<10} {:>10} {:>15.1f}% {:>19.1f}%\n", eval.total, results.database_size, eval.retrieval_rate,
                     eval.localization_rate);
  if (eval.excluded > 0) out += fmt::format("{} queries had no ground truth within tolerance\n", eval.excluded);
  return out;
}

}  // namespace synthloc
