#include "synthloc/render/meshrender.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "synthloc/parallel.hpp"

namespace synthloc {

namespace {

// Bilinear sample at continuous image coordinates (pixel x spans [x, x + 1)).
std::optional<Eigen::Vector3d> sample_bilinear(const RgbImage& img, double u, double v) {
  if (u < 0.0 || v < 0.0 || u > img.width() || v > img.height()) return std::nullopt;
  const double fx = std::clamp(u - 0.5, 0.0, img.width() - 1.0);
  const double fy = std::clamp(v - 0.5, 0.0, img.height() - 1.0);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, img.width() - 1), y1 = std::min(y0 + 1, img.height() - 1);
  const double a = fx - x0, b = fy - y0;
  auto vec = [&](int x, int y) {
    const Rgb c = img.at(x, y);
    return Eigen::Vector3d(c.r, c.g, c.b);
  };
  return (1 - a) * (1 - b) * vec(x0, y0) + a * (1 - b) * vec(x1, y0) + (1 - a) * b * vec(x0, y1) +
         a * b * vec(x1, y1);
}

std::uint8_t to_channel(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

std::optional<TexturePatch> blend_facet_texture(const std::array<Eigen::Vector3d, 3>& facet,
                                                const std::vector<PosedImage>& sources,
                                                const TextureOptions& options) {
  for (const auto& s : sources) {
    if (!(s.exposure > 0.0) || !std::isfinite(s.exposure)) throw std::invalid_argument("exposure must be finite and positive");
  }
  const Eigen::Vector3d centroid = (facet[0] + facet[1] + facet[2]) / 3.0;
  struct Candidate {
    double distance;
    std::size_t index;
  };
  std::vector<Candidate> visible;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    const auto& s = sources[j];
    const auto proj = project(s.pose.inverse() * centroid, s.cam);
    if (!proj || proj->u < 0.0 || proj->v < 0.0 || proj->u >= s.cam.width || proj->v >= s.cam.height) continue;
    visible.push_back({(s.pose.translation() - centroid).norm(), j});
  }
  if (visible.empty()) return std::nullopt;
  std::stable_sort(visible.begin(), visible.end(),
                   [](const Candidate& a, const Candidate& b) { return a.distance < b.distance; });
  visible.resize(std::min<std::size_t>(visible.size(), static_cast<std::size_t>(std::max(options.n_nearest, 1))));

  const Eigen::Vector3d e1 = facet[1] - facet[0];
  const Eigen::Vector3d e2 = facet[2] - facet[0];
  const double shortest = std::min({e1.norm(), e2.norm(), (facet[2] - facet[1]).norm()});
  const int base = std::max(options.texels_per_edge, 2);
  TexturePatch patch;
  patch.res_s = std::max(2, static_cast<int>(std::ceil(base * e1.norm() / shortest)));
  patch.res_t = std::max(2, static_cast<int>(std::ceil(base * e2.norm() / shortest)));
  patch.texels.resize(static_cast<std::size_t>(patch.res_s) * patch.res_t);

  std::vector<Pose> world_to_camera;
  for (const auto& c : visible) world_to_camera.push_back(sources[c.index].pose.inverse());

  for (int j = 0; j < patch.res_t; ++j) {
    for (int i = 0; i < patch.res_s; ++i) {
      const double s = static_cast<double>(i) / (patch.res_s - 1);
      const double t = static_cast<double>(j) / (patch.res_t - 1);
      const Eigen::Vector3d p = facet[0] + s * e1 + t * e2;
      Eigen::Vector3d sum = Eigen::Vector3d::Zero();
      double weight = 0.0;
      for (std::size_t k = 0; k < visible.size(); ++k) {
        const auto& src = sources[visible[k].index];
        const auto proj = project(world_to_camera[k] * p, src.cam);
        if (!proj) continue;
        const auto c = sample_bilinear(src.image, proj->u, proj->v);
        if (!c) continue;
        sum += src.exposure * *c;
        weight += src.exposure;
      }
      Rgb out{};
      if (weight > 0.0) {
        const Eigen::Vector3d mean = sum / weight;
        out = {to_channel(mean.x()), to_channel(mean.y()), to_channel(mean.z())};
      }
      patch.texels[static_cast<std::size_t>(j) * patch.res_s + i] = out;
    }
  }
  return patch;
}

std::size_t texture_mesh(TexturedMesh& mesh, const std::vector<PosedImage>& sources, const TextureOptions& options,
                         unsigned jobs) {
  mesh.textures.assign(mesh.faces.size(), std::nullopt);
  parallel_for(mesh.faces.size(), jobs, [&](std::size_t f) {
    const auto& face = mesh.faces[f];
    mesh.textures[f] = blend_facet_texture(
        {mesh.vertices[face[0]], mesh.vertices[face[1]], mesh.vertices[face[2]]}, sources, options);
  });
  return static_cast<std::size_t>(
      std::count_if(mesh.textures.begin(), mesh.textures.end(), [](const auto& t) { return t.has_value(); }));
}

namespace {

constexpr std::uint32_t kNoFace = std::numeric_limits<std::uint32_t>::max();

struct ClipVertex {
  Eigen::Vector3d p;    // camera frame
  Eigen::Vector2d bary; // weights of the original V1 and V2
};

// Sutherland-Hodgman against z >= near.
int clip_near(const std::array<ClipVertex, 3>& in, double near, std::array<ClipVertex, 4>& out) {
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const ClipVertex& a = in[i];
    const ClipVertex& b = in[(i + 1) % 3];
    const bool a_in = a.p.z() >= near, b_in = b.p.z() >= near;
    if (a_in) out[n++] = a;
    if (a_in != b_in) {
      const double t = (near - a.p.z()) / (b.p.z() - a.p.z());
      out[n++] = {a.p + t * (b.p - a.p), a.bary + t * (b.bary - a.bary)};
    }
  }
  return n;
}

struct Target {
  int width;
  int height;
  std::vector<double> depth;
  std::vector<std::uint32_t> face;
  std::vector<Eigen::Vector2f> bary;
};

void raster_triangle(Target& tgt, const CameraModel& cam, const ClipVertex& a, const ClipVertex& b,
                     const ClipVertex& c, std::uint32_t face_id, double far, bool cull_backfaces) {
  const double inv_z[3] = {1.0 / a.p.z(), 1.0 / b.p.z(), 1.0 / c.p.z()};
  const Eigen::Vector2d s[3] = {{cam.fx * a.p.x() * inv_z[0] + cam.cx, cam.fy * a.p.y() * inv_z[0] + cam.cy},
                                {cam.fx * b.p.x() * inv_z[1] + cam.cx, cam.fy * b.p.y() * inv_z[1] + cam.cy},
                                {cam.fx * c.p.x() * inv_z[2] + cam.cx, cam.fy * c.p.y() * inv_z[2] + cam.cy}};
  const double area = (s[1] - s[0]).x() * (s[2] - s[0]).y() - (s[1] - s[0]).y() * (s[2] - s[0]).x();
  if (area == 0.0 || !std::isfinite(area)) return;
  if (cull_backfaces && area < 0.0) return;

  const double minx = std::min({s[0].x(), s[1].x(), s[2].x()});
  const double maxx = std::max({s[0].x(), s[1].x(), s[2].x()});
  const double miny = std::min({s[0].y(), s[1].y(), s[2].y()});
  const double maxy = std::max({s[0].y(), s[1].y(), s[2].y()});
  const int x0 = std::max(0, static_cast<int>(std::ceil(minx - 0.5)));
  const int x1 = std::min(tgt.width - 1, static_cast<int>(std::floor(maxx - 0.5)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(miny - 0.5)));
  const int y1 = std::min(tgt.height - 1, static_cast<int>(std::floor(maxy - 0.5)));
  if (x0 > x1 || y0 > y1) return;

  const double inv_area = 1.0 / area;
  const Eigen::Vector2d ba[3] = {a.bary * inv_z[0], b.bary * inv_z[1], c.bary * inv_z[2]};
  for (int y = y0; y <= y1; ++y) {
    const double py = y + 0.5;
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5;
      // Screen-space barycentrics from edge functions (inclusive edges).
      double w0 = ((s[1].x() - px) * (s[2].y() - py) - (s[1].y() - py) * (s[2].x() - px)) * inv_area;
      double w1 = ((s[2].x() - px) * (s[0].y() - py) - (s[2].y() - py) * (s[0].x() - px)) * inv_area;
      double w2 = 1.0 - w0 - w1;
      if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
      const double iz = w0 * inv_z[0] + w1 * inv_z[1] + w2 * inv_z[2];
      const double z = 1.0 / iz;
      if (z > far) continue;
      const std::size_t p = static_cast<std::size_t>(y) * tgt.width + x;
      const std::uint32_t cur = tgt.face[p];
      if (cur != kNoFace) {
        const double dz = z - tgt.depth[p];
        if (dz > 1e-9) continue;
        if (dz > -1e-9 && face_id > cur) continue;
      }
      const Eigen::Vector2d bary = (w0 * ba[0] + w1 * ba[1] + w2 * ba[2]) * z;
      tgt.depth[p] = z;
      tgt.face[p] = face_id;
      tgt.bary[p] = bary.cast<float>();
    }
  }
}

}  // namespace

RenderedPair rasterize_mesh(const TexturedMesh& mesh, const Pose& camera_to_world, const CameraModel& cam,
                            const MeshRenderConfig& cfg) {
  const Pose world_to_camera = camera_to_world.inverse();
  const Eigen::Matrix3d r = world_to_camera.rotation_matrix();
  const Eigen::Vector3d t = world_to_camera.translation();
  std::vector<Eigen::Vector3d> pc(mesh.vertices.size());
  for (std::size_t i = 0; i < pc.size(); ++i) pc[i] = r * mesh.vertices[i] + t;

  // Frustum planes through the image border, as half-space tests on camera-frame points.
  const double left = -cam.cx / cam.fx, right = (cam.width - cam.cx) / cam.fx;
  const double top = -cam.cy / cam.fy, bottom = (cam.height - cam.cy) / cam.fy;
  auto outside = [&](const Eigen::Vector3d& p, int plane) {
    switch (plane) {
      case 0: return p.x() < left * p.z();
      case 1: return p.x() > right * p.z();
      case 2: return p.y() < top * p.z();
      case 3: return p.y() > bottom * p.z();
      case 4: return p.z() < cfg.near;
      default: return p.z() > cfg.far;
    }
  };

  Target tgt{cam.width, cam.height, std::vector<double>(static_cast<std::size_t>(cam.width) * cam.height, 0.0),
             std::vector<std::uint32_t>(static_cast<std::size_t>(cam.width) * cam.height, kNoFace),
             std::vector<Eigen::Vector2f>(static_cast<std::size_t>(cam.width) * cam.height)};
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    const Eigen::Vector3d& a = pc[face[0]];
    const Eigen::Vector3d& b = pc[face[1]];
    const Eigen::Vector3d& c = pc[face[2]];
    bool culled = false;
    for (int plane = 0; plane < 6 && !culled; ++plane) culled = outside(a, plane) && outside(b, plane) && outside(c, plane);
    if (culled) continue;
    const std::array<ClipVertex, 3> tri = {ClipVertex{a, {0, 0}}, ClipVertex{b, {1, 0}}, ClipVertex{c, {0, 1}}};
    std::array<ClipVertex, 4> poly;
    const int n = clip_near(tri, cfg.near, poly);
    for (int k = 1; k + 1 < n; ++k) {
      raster_triangle(tgt, cam, poly[0], poly[k], poly[k + 1], static_cast<std::uint32_t>(f), cfg.far,
                      cfg.cull_backfaces);
    }
  }

  RenderedPair out{RgbImage(cam.width, cam.height, cfg.background), DepthImage(cam.width, cam.height),
                   camera_to_world};
  const bool has_textures = !mesh.textures.empty();
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
      const std::uint32_t f = tgt.face[p];
      if (f == kNoFace) continue;
      const double b1 = tgt.bary[p].x(), b2 = tgt.bary[p].y();
      Eigen::Vector3d color;
      if (has_textures && mesh.textures[f]) {
        color = mesh.textures[f]->sample(b1, b2);
      } else {
        const auto& face = mesh.faces[f];
        auto vec = [&](int v) {
          const Rgb c = mesh.colors[v];
          return Eigen::Vector3d(c.r, c.g, c.b);
        };
        color = (1.0 - b1 - b2) * vec(face[0]) + b1 * vec(face[1]) + b2 * vec(face[2]);
      }
      out.rgb.set(x, y, {to_channel(color.x()), to_channel(color.y()), to_channel(color.z())});
      out.depth.set(x, y, static_cast<float>(tgt.depth[p]));
    }
  }
  return out;
}

}  // namespace synthloc
