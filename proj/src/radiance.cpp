#include "synthloc/render/radiance.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "synthloc/error.hpp"
#include "synthloc/parallel.hpp"

namespace synthloc {

RadianceGrid::RadianceGrid(std::array<int, 3> dims, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                           double density, double gray)
    : dims_(dims), lo_(lo), hi_(hi) {
  for (int d = 0; d < 3; ++d) {
    if (dims[d] < 2) throw std::invalid_argument("grid needs at least 2 nodes per axis");
    if (!(hi[d] > lo[d])) throw std::invalid_argument("grid bounds must have positive extent");
  }
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  density_.assign(n, density);
  color_.assign(n, Eigen::Vector3d::Constant(gray));
}

Eigen::Vector3d RadianceGrid::spacing() const {
  return (hi_ - lo_).cwiseQuotient(Eigen::Vector3d(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1));
}

void RadianceGrid::corners(const Eigen::Vector3d& x, std::array<std::size_t, 8>& idx,
                           std::array<double, 8>& w) const {
  const Eigen::Vector3d h = spacing();
  int i0[3];
  double a[3];
  for (int d = 0; d < 3; ++d) {
    const double f = std::clamp((x[d] - lo_[d]) / h[d], 0.0, dims_[d] - 1.0);
    i0[d] = std::min(static_cast<int>(f), dims_[d] - 2);
    a[d] = f - i0[d];
  }
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    idx[c] = index(i0[0] + dx, i0[1] + dy, i0[2] + dz);
    w[c] = (dx ? a[0] : 1 - a[0]) * (dy ? a[1] : 1 - a[1]) * (dz ? a[2] : 1 - a[2]);
  }
}

double RadianceGrid::sample_density(const Eigen::Vector3d& x) const {
  std::array<std::size_t, 8> idx;
  std::array<double, 8> w;
  corners(x, idx, w);
  double s = 0.0;
  for (int c = 0; c < 8; ++c) s += w[c] * density_[idx[c]];
  return s;
}

Eigen::Vector3d RadianceGrid::sample_color(const Eigen::Vector3d& x) const {
  std::array<std::size_t, 8> idx;
  std::array<double, 8> w;
  corners(x, idx, w);
  Eigen::Vector3d s = Eigen::Vector3d::Zero();
  for (int c = 0; c < 8; ++c) s += w[c] * color_[idx[c]];
  return s;
}

Eigen::Vector3d RadianceGrid::negative_density_gradient(const Eigen::Vector3d& x) const {
  const Eigen::Vector3d h = spacing();
  Eigen::Vector3d g;
  for (int d = 0; d < 3; ++d) {
    Eigen::Vector3d step = Eigen::Vector3d::Zero();
    step[d] = h[d];
    g[d] = -(sample_density(x + step) - sample_density(x - step)) / (2.0 * h[d]);
  }
  return g;
}

std::optional<std::pair<double, double>> RadianceGrid::intersect(const Eigen::Vector3d& origin,
                                                                 const Eigen::Vector3d& dir) const {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int d = 0; d < 3; ++d) {
    if (dir[d] == 0.0) {
      if (origin[d] < lo_[d] || origin[d] > hi_[d]) return std::nullopt;
      continue;
    }
    double a = (lo_[d] - origin[d]) / dir[d];
    double b = (hi_[d] - origin[d]) / dir[d];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (!(t1 > t0)) return std::nullopt;
  return std::pair{t0, t1};
}

void RadianceGrid::validate() const {
  for (double s : density_) {
    if (!std::isfinite(s) || s < 0.0) throw DataError("radiance grid has negative or non-finite density");
  }
  for (const auto& c : color_) {
    if (!c.allFinite()) throw DataError("radiance grid has non-finite colour");
  }
}

RaySamples sample_ray(const RadianceGrid& grid, const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                      double near, double far, int n) {
  if (n < 1) throw std::invalid_argument("need at least one sample per ray");
  const auto hit = grid.intersect(origin, direction);
  const double t0 = hit ? std::max(hit->first, near) : 0.0;
  const double t1 = hit ? std::min(hit->second, far) : 0.0;
  if (!hit || !(t1 > t0)) throw RuntimeFailure("ray misses field");
  RaySamples r{origin, direction, std::vector<double>(n), std::vector<double>(n)};
  const double step = (t1 - t0) / n;
  for (int i = 0; i < n; ++i) {
    r.t[i] = t0 + i * step;
    r.delta[i] = (i + 1 < n ? t0 + (i + 1) * step : t1) - r.t[i];
  }
  return r;
}

std::vector<double> render_weights(std::span<const double> sigmas, std::span<const double> deltas) {
  if (sigmas.size() != deltas.size()) throw std::invalid_argument("sigma and delta lengths differ");
  std::vector<double> w(sigmas.size());
  double optical = 0.0;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const double tau = deltas[i] * sigmas[i];
    w[i] = std::exp(-optical) * -std::expm1(-tau);
    optical += tau;
  }
  return w;
}

namespace {

struct SampledRay {
  std::vector<std::array<std::size_t, 8>> idx;
  std::vector<std::array<double, 8>> cw;
  std::vector<double> sigma;
  std::vector<Eigen::Vector3d> color;
  std::vector<double> w;
  std::vector<double> trans_after;  // T_{i+1}
};

void evaluate(const RadianceGrid& grid, const RaySamples& ray, SampledRay& s) {
  const std::size_t n = ray.t.size();
  s.idx.resize(n);
  s.cw.resize(n);
  s.sigma.resize(n);
  s.color.resize(n);
  s.trans_after.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid.corners(ray.origin + ray.t[i] * ray.direction, s.idx[i], s.cw[i]);
    double sig = 0.0;
    Eigen::Vector3d col = Eigen::Vector3d::Zero();
    for (int c = 0; c < 8; ++c) {
      sig += s.cw[i][c] * grid.density()[s.idx[i][c]];
      col += s.cw[i][c] * grid.color()[s.idx[i][c]];
    }
    s.sigma[i] = sig;
    s.color[i] = col;
  }
  s.w = render_weights(s.sigma, ray.delta);
  double optical = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    optical += ray.delta[i] * s.sigma[i];
    s.trans_after[i] = std::exp(-optical);
  }
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

template <typename Sink>
double normal_term(const RadianceGrid& grid, const Eigen::Vector3d& x, const Eigen::Vector3d& m, double scale,
                   Sink&& sink) {
  const Eigen::Vector3d g = grid.negative_density_gradient(x);
  const double len = g.norm();
  if (len < 1e-8) return 0.0;
  const Eigen::Vector3d n = g / len;
  const double loss = (n - m).lpNorm<1>() + std::abs(1.0 - n.dot(m));
  if (!sink.active()) return loss;
  const Eigen::Vector3d dn(sign(n.x() - m.x()) - sign(1.0 - n.dot(m)) * m.x(),
                           sign(n.y() - m.y()) - sign(1.0 - n.dot(m)) * m.y(),
                           sign(n.z() - m.z()) - sign(1.0 - n.dot(m)) * m.z());
  const Eigen::Vector3d dg = (dn - n * n.dot(dn)) / len;
  const Eigen::Vector3d h = grid.spacing();
  std::array<std::size_t, 8> idx;
  std::array<double, 8> w;
  for (int d = 0; d < 3; ++d) {
    Eigen::Vector3d step = Eigen::Vector3d::Zero();
    step[d] = h[d];
    const double coeff = scale * dg[d] / (2.0 * h[d]);
    grid.corners(x + step, idx, w);
    for (int c = 0; c < 8; ++c) sink.density(idx[c], -coeff * w[c]);
    grid.corners(x - step, idx, w);
    for (int c = 0; c < 8; ++c) sink.density(idx[c], coeff * w[c]);
  }
  return loss;
}

template <typename Sink>
double ray_loss_impl(const RadianceGrid& grid, const RaySamples& ray, const RayTarget& target,
                     const LossWeights& lw, const Eigen::Vector3d& background, SampledRay& s, Sink&& sink) {
  evaluate(grid, ray, s);
  const std::size_t n = ray.t.size();
  double acc = 0.0, depth_num = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    acc += s.w[i];
    depth_num += s.w[i] * ray.t[i];
    color += s.w[i] * s.color[i];
  }
  color += (1.0 - acc) * background;

  const Eigen::Vector3d residual = color - target.color;
  double loss = lw.rgb * residual.squaredNorm();
  const Eigen::Vector3d dcolor = 2.0 * lw.rgb * residual;
  std::vector<double> gw(n);
  for (std::size_t i = 0; i < n; ++i) gw[i] = dcolor.dot(s.color[i] - background);

  if (target.depth && lw.depth > 0.0) {
    const KlResult kl = depth_kl_loss(s.w, ray.t, ray.delta, *target.depth, lw.sigma_hat);
    loss += lw.depth * kl.loss;
    for (std::size_t i = 0; i < n; ++i) gw[i] += lw.depth * kl.grad[i];
  }
  if (target.normal && lw.normal > 0.0 && acc > 0.0) {
    const Eigen::Vector3d x = ray.origin + (depth_num / acc) * ray.direction;
    loss += lw.normal * normal_term(grid, x, *target.normal, lw.normal, sink);
  }
  if (!sink.active()) return loss;

  // dL/dsigma_k = delta_k (T_{k+1} g_k - sum_{i>k} g_i w_i).
  double suffix = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double dsigma = ray.delta[k] * (s.trans_after[k] * gw[k] - suffix);
    suffix += gw[k] * s.w[k];
    const Eigen::Vector3d dc = s.w[k] * dcolor;
    for (int c = 0; c < 8; ++c) {
      sink.density(s.idx[k][c], s.cw[k][c] * dsigma);
      sink.color(s.idx[k][c], s.cw[k][c] * dc);
    }
  }
  return loss;
}

struct NullSink {
  bool active() const { return false; }
  void density(std::size_t, double) {}
  void color(std::size_t, const Eigen::Vector3d&) {}
};

struct DenseSink {
  GridGradient* g;
  bool active() const { return g != nullptr; }
  void density(std::size_t i, double v) { g->density[i] += v; }
  void color(std::size_t i, const Eigen::Vector3d& v) { g->color[i] += v; }
};

struct DensityOnlySink {
  std::vector<double>* g;
  bool active() const { return g != nullptr; }
  void density(std::size_t i, double v) { (*g)[i] += v; }
  void color(std::size_t, const Eigen::Vector3d&) {}
};

// Contributions recorded in order, applied later in a fixed sequence.
struct ListSink {
  std::vector<std::pair<std::size_t, double>>* d;
  std::vector<std::pair<std::size_t, Eigen::Vector3d>>* c;
  bool active() const { return true; }
  void density(std::size_t i, double v) { d->emplace_back(i, v); }
  void color(std::size_t i, const Eigen::Vector3d& v) { c->emplace_back(i, v); }
};

}  // namespace

RayRender render_ray(const RadianceGrid& grid, const RaySamples& ray, const Eigen::Vector3d& background) {
  SampledRay s;
  evaluate(grid, ray, s);
  RayRender out;
  double depth_num = 0.0;
  out.color = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < ray.t.size(); ++i) {
    out.opacity += s.w[i];
    depth_num += s.w[i] * ray.t[i];
    out.color += s.w[i] * s.color[i];
  }
  out.color += (1.0 - out.opacity) * background;
  if (out.opacity > 0.0) {
    out.depth = depth_num / std::max(out.opacity, 1e-10);
    const Eigen::Vector3d g = grid.negative_density_gradient(ray.origin + out.depth * ray.direction);
    if (g.norm() >= 1e-8) out.normal = g.normalized();
  }
  return out;
}

KlResult depth_kl_loss(std::span<const double> weights, std::span<const double> t, std::span<const double> deltas,
                       double depth, double sigma_hat) {
  if (!(sigma_hat > 0.0)) throw std::invalid_argument("sigma_hat must be positive");
  if (weights.size() != t.size() || t.size() != deltas.size()) throw std::invalid_argument("length mismatch");
  constexpr double kEps = 1e-6;
  KlResult r;
  r.grad.resize(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double d = t[i] - depth;
    const double k = std::exp(-d * d / (2.0 * sigma_hat * sigma_hat)) * deltas[i];
    r.loss -= std::log(weights[i] + kEps) * k;
    r.grad[i] = -k / (weights[i] + kEps);
  }
  return r;
}

double normal_loss(std::span<const Eigen::Vector3d> predicted, std::span<const Eigen::Vector3d> measured) {
  if (predicted.size() != measured.size()) throw std::invalid_argument("normal count mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (std::abs(predicted[i].norm() - 1.0) > 1e-6 || std::abs(measured[i].norm() - 1.0) > 1e-6) {
      throw std::invalid_argument("normals must be unit length");
    }
    loss += (predicted[i] - measured[i]).lpNorm<1>() + std::abs(1.0 - predicted[i].dot(measured[i]));
  }
  return loss;
}

void GridGradient::reset(std::size_t n) {
  density.assign(n, 0.0);
  color.assign(n, Eigen::Vector3d::Zero());
}

GridGradient& GridGradient::operator+=(const GridGradient& other) {
  for (std::size_t i = 0; i < density.size(); ++i) {
    density[i] += other.density[i];
    color[i] += other.color[i];
  }
  return *this;
}

double ray_loss(const RadianceGrid& grid, const RaySamples& ray, const RayTarget& target, const LossWeights& weights,
                GridGradient* grad, const Eigen::Vector3d& background) {
  SampledRay s;
  if (grad && grad->density.size() != grid.node_count()) grad->reset(grid.node_count());
  if (grad) return ray_loss_impl(grid, ray, target, weights, background, s, DenseSink{grad});
  return ray_loss_impl(grid, ray, target, weights, background, s, NullSink{});
}

double normal_loss_at(const RadianceGrid& grid, const Eigen::Vector3d& x, const Eigen::Vector3d& measured,
                      std::vector<double>* grad_density) {
  if (grad_density && grad_density->size() != grid.node_count()) grad_density->assign(grid.node_count(), 0.0);
  return normal_term(grid, x, measured, 1.0, DensityOnlySink{grad_density});
}

Eigen::Vector3d pixel_ray(const Pose& camera_to_world, const CameraModel& cam, double x, double y) {
  const Eigen::Vector3d d((x + 0.5 - cam.cx) / cam.fx, (y + 0.5 - cam.cy) / cam.fy, 1.0);
  return camera_to_world.rotation_matrix() * d.normalized();
}

std::vector<double> fit_grid(RadianceGrid& grid, const std::vector<TrainingView>& views, const FitOptions& opt) {
  if (views.size() < 2) throw DataError("radiance fitting needs at least 2 training views");
  if (opt.batch < 1 || opt.samples < 1 || opt.iters < 0) throw ConfigError("invalid radiance fit options");
  for (const auto& v : views) {
    if (v.rgb.width() != v.cam.width || v.rgb.height() != v.cam.height) throw DataError("training image size mismatch");
  }
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<std::size_t> pick_view(0, views.size() - 1);

  constexpr int kChunks = 16;
  struct Chunk {
    std::vector<std::pair<std::size_t, double>> d;
    std::vector<std::pair<std::size_t, Eigen::Vector3d>> c;
    double loss = 0.0;
    int valid = 0;
    SampledRay scratch;
  };
  std::vector<Chunk> chunks(kChunks);
  struct Job {
    RaySamples ray;
    RayTarget target;
  };
  std::vector<std::optional<Job>> jobs(opt.batch);
  GridGradient grad;
  grad.reset(grid.node_count());
  std::vector<std::size_t> touched;
  std::vector<char> is_touched(grid.node_count(), 0);

  std::vector<double> trace;
  trace.reserve(opt.iters);
  for (int it = 0; it < opt.iters; ++it) {
    for (auto& job : jobs) {
      const auto& v = views[pick_view(rng)];
      const int x = std::uniform_int_distribution<int>(0, v.cam.width - 1)(rng);
      const int y = std::uniform_int_distribution<int>(0, v.cam.height - 1)(rng);
      const Eigen::Vector3d dir = pixel_ray(v.pose, v.cam, x, y);
      const Eigen::Vector3d origin = v.pose.translation();
      const auto hit = grid.intersect(origin, dir);
      if (!hit || std::min(hit->second, opt.far) <= std::max(hit->first, opt.near)) {
        job.reset();
        continue;
      }
      const Rgb c = v.rgb.at(x, y);
      RayTarget target{Eigen::Vector3d(c.r, c.g, c.b) / 255.0, std::nullopt, std::nullopt};
      if (v.depth.width() == v.cam.width && v.depth.at(x, y) > 0.0f) {
        const double cos_axis = dir.dot(v.pose.rotation_matrix().col(2));
        target.depth = v.depth.at(x, y) / cos_axis;
      }
      if (!v.normals.empty()) {
        const Eigen::Vector3f& n = v.normals[static_cast<std::size_t>(y) * v.cam.width + x];
        if (n.squaredNorm() > 0.0f) target.normal = n.cast<double>().normalized();
      }
      job = Job{sample_ray(grid, origin, dir, opt.near, opt.far, opt.samples), target};
    }
    parallel_for(kChunks, opt.jobs, [&](std::size_t ci) {
      Chunk& ch = chunks[ci];
      ch.d.clear();
      ch.c.clear();
      ch.loss = 0.0;
      ch.valid = 0;
      const std::size_t begin = jobs.size() * ci / kChunks, end = jobs.size() * (ci + 1) / kChunks;
      for (std::size_t j = begin; j < end; ++j) {
        if (!jobs[j]) continue;
        ch.loss += ray_loss_impl(grid, jobs[j]->ray, jobs[j]->target, opt.weights, Eigen::Vector3d::Zero(),
                                 ch.scratch, ListSink{&ch.d, &ch.c});
        ++ch.valid;
      }
    });
    double loss = 0.0;
    int valid = 0;
    for (const auto& ch : chunks) {
      loss += ch.loss;
      valid += ch.valid;
      for (const auto& [i, v] : ch.d) {
        if (!is_touched[i]) is_touched[i] = 1, touched.push_back(i);
        grad.density[i] += v;
      }
      for (const auto& [i, v] : ch.c) {
        if (!is_touched[i]) is_touched[i] = 1, touched.push_back(i);
        grad.color[i] += v;
      }
    }
    const double mean = valid > 0 ? loss / valid : 0.0;
    if (!std::isfinite(mean)) {
      throw RuntimeFailure("radiance fit diverged at iteration " + std::to_string(it) + " (loss " +
                           std::to_string(mean) + "); lower the learning rates");
    }
    trace.push_back(mean);
    // Summed (not averaged) batch gradient, then projection onto the valid ranges.
    for (std::size_t i : touched) {
      grid.density()[i] = std::max(0.0, grid.density()[i] - opt.lr_density * grad.density[i]);
      grid.color()[i] = (grid.color()[i] - opt.lr_color * grad.color[i]).cwiseMax(0.0).cwiseMin(1.0);
      grad.density[i] = 0.0;
      grad.color[i].setZero();
      is_touched[i] = 0;
    }
    touched.clear();
  }
  return trace;
}

RenderedPair render_field(const RadianceGrid& grid, const Pose& camera_to_world, const CameraModel& cam,
                          const FieldRenderOptions& options) {
  RenderedPair out{RgbImage(cam.width, cam.height, options.background), DepthImage(cam.width, cam.height),
                   camera_to_world};
  const Eigen::Vector3d bg(options.background.r / 255.0, options.background.g / 255.0, options.background.b / 255.0);
  const Eigen::Vector3d axis = camera_to_world.rotation_matrix().col(2);
  const Eigen::Vector3d origin = camera_to_world.translation();
  parallel_for(static_cast<std::size_t>(cam.height), options.jobs, [&](std::size_t yi) {
    const int y = static_cast<int>(yi);
    for (int x = 0; x < cam.width; ++x) {
      const Eigen::Vector3d dir = pixel_ray(camera_to_world, cam, x, y);
      const auto hit = grid.intersect(origin, dir);
      if (!hit || std::min(hit->second, options.far) <= std::max(hit->first, options.near)) continue;
      const RayRender r = render_ray(grid, sample_ray(grid, origin, dir, options.near, options.far, options.samples), bg);
      auto ch = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(255.0 * v), 0L, 255L)); };
      out.rgb.set(x, y, {ch(r.color.x()), ch(r.color.y()), ch(r.color.z())});
      if (r.opacity >= options.min_opacity) out.depth.set(x, y, static_cast<float>(r.depth * dir.dot(axis)));
    }
  });
  return out;
}

void save_grid(const RadianceGrid& grid, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian");
  nlohmann::json header = {{"format", "synthloc-radiance"},
                           {"version", 1},
                           {"dims", grid.dims()},
                           {"bounds", {{"min", {grid.lo().x(), grid.lo().y(), grid.lo().z()}},
                                       {"max", {grid.hi().x(), grid.hi().y(), grid.hi().z()}}}},
                           {"dtype", "float32"},
                           {"layout", "density[n] then rgb[n][3], x fastest"}};
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << header.dump() << '\n';
  std::vector<float> buf;
  buf.reserve(grid.node_count() * 4);
  for (double s : grid.density()) buf.push_back(static_cast<float>(s));
  for (const auto& c : grid.color())
    for (int k = 0; k < 3; ++k) buf.push_back(static_cast<float>(c[k]));
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!f) throw DataError("failed writing " + path.string());
}

RadianceGrid load_grid(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open field checkpoint " + path.string());
  std::string line;
  std::getline(f, line);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad checkpoint header: " + e.what());
  }
  if (h.value("format", "") != "synthloc-radiance" || h.value("dtype", "") != "float32") {
    throw DataError(path.string() + ": not a float32 radiance checkpoint");
  }
  RadianceGrid grid;
  try {
    const auto dims = h.at("dims").get<std::array<int, 3>>();
    const auto lo = h.at("bounds").at("min").get<std::array<double, 3>>();
    const auto hi = h.at("bounds").at("max").get<std::array<double, 3>>();
    grid = RadianceGrid(dims, Eigen::Vector3d(lo[0], lo[1], lo[2]), Eigen::Vector3d(hi[0], hi[1], hi[2]));
  } catch (const std::exception& e) {
    throw DataError(path.string() + ": bad checkpoint header: " + e.what());
  }
  std::vector<float> buf(grid.node_count() * 4);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (f.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)) || f.peek() != EOF) {
    throw DataError(path.string() + ": checkpoint payload size does not match header");
  }
  const std::size_t n = grid.node_count();
  for (std::size_t i = 0; i < n; ++i) {
    grid.density()[i] = buf[i];
    grid.color()[i] = Eigen::Vector3d(buf[n + 3 * i], buf[n + 3 * i + 1], buf[n + 3 * i + 2]);
  }
  grid.validate();
  return grid;
}

namespace {

struct Box {
  Eigen::Vector3d lo, hi;
  int material;
};

Eigen::Vector3d toy_color(int material, const Eigen::Vector3d& p) {
  switch (material) {
    case 0: {
      const bool odd = (static_cast<int>(std::floor(p.x() * 5)) + static_cast<int>(std::floor(p.y() * 5))) % 2;
      return odd ? Eigen::Vector3d(0.9, 0.85, 0.7) : Eigen::Vector3d(0.2, 0.3, 0.5);
    }
    case 1:
      return {0.8, 0.2 + p.z(), 0.1};
    default:
      return {0.1, 0.7, 0.3};
  }
}

}  // namespace

ToyScene make_toy_scene(int views, int width, int height) {
  const std::vector<Box> boxes = {{{0.0, 0.0, 0.0}, {1.0, 1.0, 0.1}, 0},
                                  {{0.3, 0.35, 0.1}, {0.55, 0.6, 0.45}, 1},
                                  {{0.6, 0.2, 0.1}, {0.8, 0.35, 0.3}, 2}};
  ToyScene scene{{-0.05, -0.05, -0.05}, {1.05, 1.05, 0.6}, {}};
  const CameraModel cam{0.9 * width, 0.9 * width, width / 2.0, height / 2.0, width, height};
  const Eigen::Vector3d target(0.5, 0.5, 0.15);
  for (int k = 0; k < views; ++k) {
    const double a = 2.0 * std::numbers::pi * k / views;
    const Eigen::Vector3d pos(0.5 + 1.1 * std::cos(a), 0.5 + 1.1 * std::sin(a), k % 2 ? 0.9 : 0.6);
    const Eigen::Vector3d fwd = (target - pos).normalized();
    const Eigen::Vector3d right = fwd.cross(Eigen::Vector3d::UnitZ()).normalized();
    Eigen::Matrix3d r;
    r << right, fwd.cross(right), fwd;
    TrainingView v{RgbImage(width, height), DepthImage(width, height),
                   std::vector<Eigen::Vector3f>(static_cast<std::size_t>(width) * height, Eigen::Vector3f::Zero()),
                   Pose(r, pos), cam};
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const Eigen::Vector3d dir = pixel_ray(v.pose, cam, x, y);
        double best = std::numeric_limits<double>::infinity();
        Eigen::Vector3d normal = Eigen::Vector3d::Zero();
        int material = -1;
        for (const auto& b : boxes) {
          double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
          int axis = -1;
          double side = 0.0;
          for (int d = 0; d < 3; ++d) {
            double lo = (b.lo[d] - pos[d]) / dir[d], hi = (b.hi[d] - pos[d]) / dir[d];
            double s = -1.0;
            if (lo > hi) std::swap(lo, hi), s = 1.0;
            if (lo > t0) t0 = lo, axis = d, side = s;
            t1 = std::min(t1, hi);
          }
          if (t1 >= t0 && t0 > 0.0 && t0 < best) {
            best = t0;
            material = b.material;
            normal = Eigen::Vector3d::Zero();
            normal[axis] = side;
          }
        }
        if (material < 0) continue;
        const Eigen::Vector3d p = pos + best * dir;
        const Eigen::Vector3d c = toy_color(material, p);
        v.rgb.set(x, y, {static_cast<std::uint8_t>(std::lround(255 * c.x())),
                         static_cast<std::uint8_t>(std::lround(255 * c.y())),
                         static_cast<std::uint8_t>(std::lround(255 * c.z()))});
        v.depth.set(x, y, static_cast<float>(best * dir.dot(fwd)));
        v.normals[static_cast<std::size_t>(y) * width + x] = normal.cast<float>();
      }
    }
    scene.views.push_back(std::move(v));
  }
  return scene;
}

}  // namespace synthloc
