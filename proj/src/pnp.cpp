#include "synthloc/localize/pnp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace synthloc {

namespace {

double polish(double x, const std::array<double, 5>& c) {
  // c[k] multiplies x^k.
  for (int it = 0; it < 4; ++it) {
    double f = 0.0, df = 0.0;
    for (int k = 4; k >= 0; --k) {
      df = df * x + f;
      f = f * x + c[k];
    }
    if (df == 0.0) break;
    const double step = f / df;
    x -= step;
    if (std::abs(step) < 1e-15 * (1.0 + std::abs(x))) break;
  }
  return x;
}

}  // namespace

std::vector<double> real_quartic_roots(double a4, double a3, double a2, double a1, double a0) {
  std::array<double, 5> c{a0, a1, a2, a3, a4};
  const double scale = std::max({std::abs(a4), std::abs(a3), std::abs(a2), std::abs(a1), std::abs(a0)});
  if (scale == 0.0) return {};
  int degree = 4;
  while (degree > 0 && std::abs(c[degree]) <= 1e-14 * scale) --degree;
  if (degree == 0) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < degree; ++i) companion(i, degree - 1) = -c[i] / c[degree];
  const Eigen::VectorXcd ev = companion.eigenvalues();
  std::vector<double> roots;
  for (int i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i].imag()) > 1e-6 * std::max(1.0, std::abs(ev[i]))) continue;
    roots.push_back(polish(ev[i].real(), c));
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

std::vector<Pose> solve_p3p(const std::array<Eigen::Vector3d, 3>& world,
                            const std::array<Eigen::Vector3d, 3>& bearings) {
  const Eigen::Vector3d j1 = bearings[0].normalized();
  const Eigen::Vector3d j2 = bearings[1].normalized();
  const Eigen::Vector3d j3 = bearings[2].normalized();
  const double a2 = (world[1] - world[2]).squaredNorm();
  const double b2 = (world[0] - world[2]).squaredNorm();
  const double c2 = (world[0] - world[1]).squaredNorm();
  if (a2 < 1e-18 || b2 < 1e-18 || c2 < 1e-18) return {};
  const double ca = j2.dot(j3), cb = j1.dot(j3), cg = j1.dot(j2);

  // Grunert's quartic in v = s3 / s1 (Haralick et al. 1994 notation).
  const double amc = (a2 - c2) / b2;
  const double apc = (a2 + c2) / b2;
  const double A4 = (amc - 1.0) * (amc - 1.0) - 4.0 * c2 / b2 * ca * ca;
  const double A3 = 4.0 * (amc * (1.0 - amc) * cb - (1.0 - apc) * ca * cg + 2.0 * c2 / b2 * ca * ca * cb);
  const double A2 = 2.0 * (amc * amc - 1.0 + 2.0 * amc * amc * cb * cb + 2.0 * (b2 - c2) / b2 * ca * ca -
                           4.0 * apc * ca * cb * cg + 2.0 * (b2 - a2) / b2 * cg * cg);
  const double A1 = 4.0 * (-amc * (1.0 + amc) * cb + 2.0 * a2 / b2 * cg * cg * cb - (1.0 - apc) * ca * cg);
  const double A0 = (1.0 + amc) * (1.0 + amc) - 4.0 * a2 / b2 * cg * cg;

  std::vector<Pose> poses;
  for (const double v : real_quartic_roots(A4, A3, A2, A1, A0)) {
    if (v <= 0.0) continue;
    const double den = 2.0 * (cg - v * ca);
    if (std::abs(den) < 1e-12) continue;
    const double u = ((-1.0 + amc) * v * v - 2.0 * amc * cb * v + 1.0 + amc) / den;
    if (u <= 0.0) continue;
    const double q = 1.0 + v * v - 2.0 * v * cb;
    if (q <= 0.0) continue;
    const double s1 = std::sqrt(b2 / q);
    const double s2 = u * s1;
    const double s3 = v * s1;
    Eigen::Matrix3d src, dst;
    src << world[0], world[1], world[2];
    dst << s1 * j1, s2 * j2, s3 * j3;
    const Eigen::Matrix4d T = Eigen::umeyama(src, dst, false);
    const Eigen::Matrix3d R = T.topLeftCorner<3, 3>();
    if (!R.allFinite()) continue;
    poses.emplace_back(R, Eigen::Vector3d(T.topRightCorner<3, 1>()));
  }
  return poses;
}

double reprojection_error_sq(const Pose& camera_from_points, const Eigen::Vector3d& p, const Eigen::Vector2d& uv,
                             const CameraModel& cam) {
  const Eigen::Vector3d pc = camera_from_points * p;
  if (pc.z() <= 1e-9) return std::numeric_limits<double>::infinity();
  const double du = cam.fx * pc.x() / pc.z() + cam.cx - uv.x();
  const double dv = cam.fy * pc.y() / pc.z() + cam.cy - uv.y();
  return du * du + dv * dv;
}

Pose refine_pose(const Pose& initial, const std::vector<Eigen::Vector3d>& points,
                 const std::vector<Eigen::Vector2d>& pixels, const std::vector<int>& subset, const CameraModel& cam,
                 int iterations) {
  auto cost = [&](const Pose& T) {
    double s = 0.0;
    for (const int i : subset) s += reprojection_error_sq(T, points[i], pixels[i], cam);
    return s;
  };
  Pose T = initial;
  double current = cost(T);
  double lambda = 1e-4;
  for (int it = 0; it < iterations && std::isfinite(current); ++it) {
    Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (const int i : subset) {
      const Eigen::Vector3d pc = T * points[i];
      const double iz = 1.0 / pc.z();
      const Eigen::Vector2d r(cam.fx * pc.x() * iz + cam.cx - pixels[i].x(),
                              cam.fy * pc.y() * iz + cam.cy - pixels[i].y());
      Eigen::Matrix<double, 2, 3> Jp;
      Jp << cam.fx * iz, 0.0, -cam.fx * pc.x() * iz * iz, 0.0, cam.fy * iz, -cam.fy * pc.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> Jd;
      Jd.leftCols<3>().setIdentity();
      Jd.rightCols<3>() << 0.0, pc.z(), -pc.y(), -pc.z(), 0.0, pc.x(), pc.y(), -pc.x(), 0.0;
      const Eigen::Matrix<double, 2, 6> J = Jp * Jd;
      H += J.transpose() * J;
      g += J.transpose() * r;
    }
    bool improved = false;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::Matrix<double, 6, 6> A = H;
      A.diagonal() += lambda * H.diagonal().cwiseMax(1e-9);
      const Eigen::Matrix<double, 6, 1> delta = -A.ldlt().solve(g);
      if (!delta.allFinite()) break;
      const Eigen::Vector3d phi = delta.tail<3>();
      const double angle = phi.norm();
      const Eigen::Quaterniond dq =
          angle > 0.0 ? Eigen::Quaterniond(Eigen::AngleAxisd(angle, phi / angle)) : Eigen::Quaterniond::Identity();
      const Pose candidate(dq * T.rotation(), dq * T.translation() + delta.head<3>());
      const double c = cost(candidate);
      if (c < current) {
        T = candidate;
        const bool converged = current - c < 1e-12 * (1.0 + current);
        current = c;
        lambda = std::max(lambda * 0.1, 1e-9);
        improved = !converged;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  return T;
}

namespace {

std::vector<int> count_inliers(const Pose& T, const std::vector<Eigen::Vector3d>& points,
                               const std::vector<Eigen::Vector2d>& pixels, const CameraModel& cam, double thr2) {
  std::vector<int> inliers;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (reprojection_error_sq(T, points[i], pixels[i], cam) < thr2) inliers.push_back(static_cast<int>(i));
  }
  return inliers;
}

Eigen::Vector3d bearing(const Eigen::Vector2d& uv, const CameraModel& cam) {
  return Eigen::Vector3d((uv.x() - cam.cx) / cam.fx, (uv.y() - cam.cy) / cam.fy, 1.0).normalized();
}

}  // namespace

PnpResult solve_pnp_ransac(const std::vector<Eigen::Vector3d>& points, const std::vector<Eigen::Vector2d>& pixels,
                           const CameraModel& cam, const RansacOptions& options) {
  PnpResult result;
  const int n = static_cast<int>(points.size());
  if (n < 3 || pixels.size() != points.size()) return result;
  const double thr2 = options.threshold_px * options.threshold_px;
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);

  Pose best;
  std::vector<int> best_inliers;
  long long needed = options.max_iterations;
  int it = 0;
  for (; it < options.max_iterations && it < needed; ++it) {
    int s[3];
    s[0] = pick(rng);
    do s[1] = pick(rng); while (s[1] == s[0]);
    do s[2] = pick(rng); while (s[2] == s[0] || s[2] == s[1]);
    const std::array<Eigen::Vector3d, 3> w{points[s[0]], points[s[1]], points[s[2]]};
    if ((w[1] - w[0]).cross(w[2] - w[0]).norm() < 1e-10) continue;
    const std::array<Eigen::Vector3d, 3> b{bearing(pixels[s[0]], cam), bearing(pixels[s[1]], cam),
                                           bearing(pixels[s[2]], cam)};
    for (const Pose& candidate : solve_p3p(w, b)) {
      auto inl = count_inliers(candidate, points, pixels, cam, thr2);
      if (inl.size() > best_inliers.size()) {
        best_inliers = std::move(inl);
        best = candidate;
        const double ratio = static_cast<double>(best_inliers.size()) / n;
        const double miss = 1.0 - ratio * ratio * ratio;
        if (miss <= 0.0) {
          needed = 0;
        } else {
          const double k = std::log(1.0 - options.confidence) / std::log(miss);
          needed = std::isfinite(k) ? static_cast<long long>(std::ceil(k)) : options.max_iterations;
        }
      }
    }
  }
  result.iterations = it;
  if (best_inliers.size() < 3) return result;

  for (int round = 0; round < 3; ++round) {
    const Pose refined = refine_pose(best, points, pixels, best_inliers, cam, options.refine_iterations);
    auto inl = count_inliers(refined, points, pixels, cam, thr2);
    if (inl.size() < best_inliers.size()) break;
    const bool same = inl == best_inliers;
    best = refined;
    best_inliers = std::move(inl);
    if (same) break;
  }
  result.ok = true;
  result.pose = best;
  result.inliers = best_inliers;
  double sum = 0.0;
  for (const int i : best_inliers) sum += std::sqrt(reprojection_error_sq(best, points[i], pixels[i], cam));
  result.mean_error_px = sum / static_cast<double>(best_inliers.size());
  return result;
}

}  // namespace synthloc
