#include "synthloc/render/splat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>

namespace synthloc {

void SplatConfig::validate() const {
  if (rho_min < 1 || rho_max < rho_min) throw std::invalid_argument("splat sizes must satisfy 1 <= rho_min <= rho_max");
  if (!(near > 0.0 && near < far)) throw std::invalid_argument("splat clip planes must satisfy 0 < near < far");
}

int point_size(double z, const SplatConfig& cfg) {
  if (!(z > 0.0)) throw std::invalid_argument("point_size requires z > 0");
  const double rho = std::min(std::max(cfg.rho_max / z, static_cast<double>(cfg.rho_min)),
                              static_cast<double>(cfg.rho_max));
  return static_cast<int>(std::lround(rho));
}

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
constexpr double kTieEpsilon = 1e-9;

struct ZBuffer {
  int width;
  int height;
  std::vector<double> depth;
  std::vector<std::uint32_t> index;

  ZBuffer(int w, int h)
      : width(w), height(h), depth(static_cast<std::size_t>(w) * h, 0.0),
        index(static_cast<std::size_t>(w) * h, kNone) {}

  void splat(int x0, int y0, int rho, double z, std::uint32_t id) {
    const int xa = std::max(x0, 0), xb = std::min(x0 + rho, width);
    const int ya = std::max(y0, 0), yb = std::min(y0 + rho, height);
    for (int y = ya; y < yb; ++y) {
      const std::size_t row = static_cast<std::size_t>(y) * width;
      for (int x = xa; x < xb; ++x) {
        const std::size_t p = row + x;
        const std::uint32_t cur = index[p];
        if (cur != kNone) {
          const double dz = z - depth[p];
          if (dz > kTieEpsilon) continue;
          if (dz > -kTieEpsilon && id > cur) continue;
        }
        depth[p] = z;
        index[p] = id;
      }
    }
  }
};

struct Projected {
  double u;
  double v;
  double z;
  std::uint32_t id;
  int rho;
};

// Visible points in index order, with their splat size.
std::vector<Projected> project_cloud(const ColorPointCloud& cloud, const Pose& camera_to_world,
                                     const CameraModel& cam, const SplatConfig& cfg) {
  cfg.validate();
  const Pose world_to_camera = camera_to_world.inverse();
  const Eigen::Matrix3d r = world_to_camera.rotation_matrix();
  const Eigen::Vector3d t = world_to_camera.translation();
  std::vector<Projected> out;
  out.reserve(cloud.size() / 2);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d pc = r * cloud.points[i] + t;
    const double z = pc.z();
    if (z < cfg.near || z > cfg.far) continue;
    const double u = cam.fx * pc.x() / z + cam.cx;
    const double v = cam.fy * pc.y() / z + cam.cy;
    const int rho = point_size(z, cfg);
    // Cull splats that cannot touch the image.
    if (u + rho < 0.0 || v + rho < 0.0 || u - rho > cam.width || v - rho > cam.height) continue;
    out.push_back({u, v, z, static_cast<std::uint32_t>(i), rho});
  }
  return out;
}

void draw(ZBuffer& zb, const Projected& p) {
  const int x0 = static_cast<int>(std::floor(p.u - 0.5 * p.rho + 0.5));
  const int y0 = static_cast<int>(std::floor(p.v - 0.5 * p.rho + 0.5));
  zb.splat(x0, y0, p.rho, p.z, p.id);
}

RenderedPair resolve(const ZBuffer& zb, const ColorPointCloud& cloud, const Pose& pose, const SplatConfig& cfg) {
  RenderedPair out{RgbImage(zb.width, zb.height, cfg.background), DepthImage(zb.width, zb.height), pose};
  for (int y = 0; y < zb.height; ++y) {
    for (int x = 0; x < zb.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * zb.width + x;
      if (zb.index[p] == kNone) continue;
      out.rgb.set(x, y, cloud.colors[zb.index[p]]);
      out.depth.set(x, y, static_cast<float>(zb.depth[p]));
    }
  }
  return out;
}

}  // namespace

RenderedPair render_cloud(const ColorPointCloud& cloud, const Pose& camera_to_world, const CameraModel& cam,
                          const SplatConfig& cfg) {
  ZBuffer zb(cam.width, cam.height);
  for (const auto& p : project_cloud(cloud, camera_to_world, cam, cfg)) draw(zb, p);
  return resolve(zb, cloud, camera_to_world, cfg);
}

RenderedPair render_cloud_grouped(const ColorPointCloud& cloud, const Pose& camera_to_world, const CameraModel& cam,
                                  const SplatConfig& cfg) {
  std::map<int, std::vector<Projected>> passes;
  for (const auto& p : project_cloud(cloud, camera_to_world, cam, cfg)) passes[p.rho].push_back(p);
  ZBuffer zb(cam.width, cam.height);
  // Largest splats first; any order gives the same merge.
  for (auto it = passes.rbegin(); it != passes.rend(); ++it) {
    for (const auto& p : it->second) draw(zb, p);
  }
  return resolve(zb, cloud, camera_to_world, cfg);
}

}  // namespace synthloc
