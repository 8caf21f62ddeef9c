#pragma once

#include <array>
#include <optional>
#include <vector>

#include "synthloc/geom/camera.hpp"
#include "synthloc/geom/image.hpp"
#include "synthloc/geom/mesh.hpp"

namespace synthloc {

// A source photograph for texturing: image, camera-to-world pose, intrinsics, exposure.
struct PosedImage {
  RgbImage image;
  Pose pose;
  CameraModel cam;
  double exposure = 1.0;
};

struct TextureOptions {
  int n_nearest = 5;
  int texels_per_edge = 16;  // along the facet's shortest edge
};

// Exposure-weighted blend of the n nearest sources (camera centre to facet
// centroid) whose view contains the facet centroid:
//   I(u, v) = (1 / sigma_bar) * sum_j sigma_j I_j(pi(R_j, t_j, P)) / n,
// with P on the facet at texel (u, v). Sources whose projection of a texel
// leaves the image are dropped for that texel and the weights renormalized.
// Returns std::nullopt when no source sees the facet.
std::optional<TexturePatch> blend_facet_texture(const std::array<Eigen::Vector3d, 3>& facet,
                                                const std::vector<PosedImage>& sources,
                                                const TextureOptions& options = {});

// Textures every facet in place; facets no source sees stay untextured.
// Returns the number of textured facets. jobs = 0 uses all cores.
std::size_t texture_mesh(TexturedMesh& mesh, const std::vector<PosedImage>& sources,
                         const TextureOptions& options = {}, unsigned jobs = 0);

struct MeshRenderConfig {
  Rgb background{0, 0, 0};
  double near = 0.05;  // triangles are clipped against this plane
  double far = 100.0;
  bool cull_backfaces = false;
};

// Rasterizes at pixel centres (x + 0.5, y + 0.5) with perspective-correct
// interpolation. Nearest depth wins; depths within 1e-9 go to the lower face
// index. Textured facets sample their patch, others interpolate vertex colours.
RenderedPair rasterize_mesh(const TexturedMesh& mesh, const Pose& camera_to_world, const CameraModel& cam,
                            const MeshRenderConfig& cfg = {});

}  // namespace synthloc
