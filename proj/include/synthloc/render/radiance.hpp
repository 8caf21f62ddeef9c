#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "synthloc/geom/camera.hpp"
#include "synthloc/geom/image.hpp"

namespace synthloc {

// Density and view-independent colour on a lattice of dims[0] x dims[1] x dims[2]
// nodes spanning [lo, hi]; values between nodes are trilinear. x varies fastest.
class RadianceGrid {
 public:
  RadianceGrid() = default;
  RadianceGrid(std::array<int, 3> dims, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
               double density = 0.01, double gray = 0.5);

  const std::array<int, 3>& dims() const { return dims_; }
  const Eigen::Vector3d& lo() const { return lo_; }
  const Eigen::Vector3d& hi() const { return hi_; }
  Eigen::Vector3d spacing() const;
  std::size_t node_count() const { return density_.size(); }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims_[1] + j) * dims_[0] + i;
  }

  std::vector<double>& density() { return density_; }
  const std::vector<double>& density() const { return density_; }
  std::vector<Eigen::Vector3d>& color() { return color_; }
  const std::vector<Eigen::Vector3d>& color() const { return color_; }

  // The 8 lattice nodes around x (clamped to the box) and their trilinear weights.
  void corners(const Eigen::Vector3d& x, std::array<std::size_t, 8>& idx, std::array<double, 8>& w) const;
  double sample_density(const Eigen::Vector3d& x) const;
  Eigen::Vector3d sample_color(const Eigen::Vector3d& x) const;
  // -grad(sigma) by central differences of the trilinear field, one lattice step per axis.
  Eigen::Vector3d negative_density_gradient(const Eigen::Vector3d& x) const;

  // Ray/box overlap as [t0, t1], or nullopt.
  std::optional<std::pair<double, double>> intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const;

  // Throws DataError on negative density or non-finite values.
  void validate() const;

 private:
  std::array<int, 3> dims_{0, 0, 0};
  Eigen::Vector3d lo_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi_ = Eigen::Vector3d::Zero();
  std::vector<double> density_;
  std::vector<Eigen::Vector3d> color_;
};

struct RaySamples {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;  // unit
  std::vector<double> t;
  std::vector<double> delta;
};

// Uniform samples t_i = t0 + i * (t1 - t0) / n over the ray's overlap with the
// grid box clipped to [near, far]; the last delta runs to the clipped far end.
// Throws RuntimeFailure("ray misses field") when there is no overlap.
RaySamples sample_ray(const RadianceGrid& grid, const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                      double near, double far, int n);

// w_i = exp(-sum_{j<i} delta_j sigma_j) (1 - exp(-delta_i sigma_i)).
std::vector<double> render_weights(std::span<const double> sigmas, std::span<const double> deltas);

struct RayRender {
  Eigen::Vector3d color;
  double depth = 0.0;  // along the ray; 0 when nothing is hit
  double opacity = 0.0;
  std::optional<Eigen::Vector3d> normal;
};

RayRender render_ray(const RadianceGrid& grid, const RaySamples& ray,
                     const Eigen::Vector3d& background = Eigen::Vector3d::Zero());

struct KlResult {
  double loss = 0.0;
  std::vector<double> grad;  // dL/dw_i
};

// L = -sum_i log(w_i + 1e-6) exp(-(t_i - D)^2 / (2 sigma_hat^2)) delta_i.
KlResult depth_kl_loss(std::span<const double> weights, std::span<const double> t, std::span<const double> deltas,
                       double depth, double sigma_hat);

// sum over pairs of |n - m|_1 + |1 - n.m|. Throws std::invalid_argument on non-unit input.
double normal_loss(std::span<const Eigen::Vector3d> predicted, std::span<const Eigen::Vector3d> measured);

struct LossWeights {
  double rgb = 1.0;
  double depth = 0.5;
  double normal = 0.01;
  double sigma_hat = 0.05;
};

struct RayTarget {
  Eigen::Vector3d color;
  std::optional<double> depth;  // along the ray
  std::optional<Eigen::Vector3d> normal;
};

struct GridGradient {
  std::vector<double> density;
  std::vector<Eigen::Vector3d> color;
  void reset(std::size_t n);
  GridGradient& operator+=(const GridGradient& other);
};

// Loss of one ray (weighted photometric squared error, depth-KL, normal term)
// with its gradient accumulated into `grad` when non-null. The normal term
// treats the expected-depth point as a constant.
double ray_loss(const RadianceGrid& grid, const RaySamples& ray, const RayTarget& target, const LossWeights& weights,
                GridGradient* grad, const Eigen::Vector3d& background = Eigen::Vector3d::Zero());

// Normal term at a fixed point, with its gradient w.r.t. density when non-null.
double normal_loss_at(const RadianceGrid& grid, const Eigen::Vector3d& x, const Eigen::Vector3d& measured,
                      std::vector<double>* grad_density);

struct TrainingView {
  RgbImage rgb;
  DepthImage depth;                      // camera-frame z, 0 = none
  std::vector<Eigen::Vector3f> normals;  // world frame, empty = none; zero vector = none
  Pose pose;                             // camera to world
  CameraModel cam;
};

struct FitOptions {
  int iters = 2000;
  int batch = 1024;
  int samples = 128;
  double near = 0.05;
  double far = 100.0;
  double lr_color = 0.05;
  double lr_density = 5.0;
  LossWeights weights;
  std::uint64_t seed = 0;
  unsigned jobs = 0;
};

// Mean per-ray loss of each iteration's batch, evaluated before its update.
std::vector<double> fit_grid(RadianceGrid& grid, const std::vector<TrainingView>& views, const FitOptions& options);

// Unit ray direction through the centre of pixel (x, y), world frame.
Eigen::Vector3d pixel_ray(const Pose& camera_to_world, const CameraModel& cam, double x, double y);

struct FieldRenderOptions {
  int samples = 128;
  double near = 0.05;
  double far = 100.0;
  double min_opacity = 0.5;  // below this the depth pixel is left invalid
  Rgb background{0, 0, 0};
  unsigned jobs = 0;
};

RenderedPair render_field(const RadianceGrid& grid, const Pose& camera_to_world, const CameraModel& cam,
                          const FieldRenderOptions& options = {});

// Checkpoint: one JSON header line, then density and rgb as little-endian float32.
void save_grid(const RadianceGrid& grid, const std::filesystem::path& path);
RadianceGrid load_grid(const std::filesystem::path& path);

// Desk-scale scene of boxes inside [0, 1]^3 seen from a ring of cameras, with
// exact depth and normals. Views alternate between training and held-out use.
struct ToyScene {
  Eigen::Vector3d lo, hi;
  std::vector<TrainingView> views;
};
ToyScene make_toy_scene(int views = 12, int width = 64, int height = 48);

}  // namespace synthloc
