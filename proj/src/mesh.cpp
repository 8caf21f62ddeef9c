#include "synthloc/geom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "synthloc/error.hpp"

namespace synthloc {

Eigen::Vector3d TexturePatch::sample(double s, double t) const {
  const double fs = std::clamp(s, 0.0, 1.0) * (res_s - 1);
  const double ft = std::clamp(t, 0.0, 1.0) * (res_t - 1);
  const int i0 = std::min(static_cast<int>(fs), res_s - 1);
  const int j0 = std::min(static_cast<int>(ft), res_t - 1);
  const int i1 = std::min(i0 + 1, res_s - 1);
  const int j1 = std::min(j0 + 1, res_t - 1);
  const double a = fs - i0;
  const double b = ft - j0;
  auto vec = [](Rgb c) { return Eigen::Vector3d(c.r, c.g, c.b); };
  return (1 - a) * (1 - b) * vec(texel(i0, j0)) + a * (1 - b) * vec(texel(i1, j0)) +
         (1 - a) * b * vec(texel(i0, j1)) + a * b * vec(texel(i1, j1));
}

void TexturedMesh::validate() const {
  if (colors.size() != vertices.size()) throw DataError("mesh colors/vertices length mismatch");
  if (!textures.empty() && textures.size() != faces.size()) throw DataError("mesh textures/faces length mismatch");
  const int n = static_cast<int>(vertices.size());
  for (const auto& f : faces) {
    for (int idx : f) {
      if (idx < 0 || idx >= n) throw DataError("mesh face index " + std::to_string(idx) + " out of range");
    }
  }
}

double face_area(const TexturedMesh& mesh, std::size_t face) {
  const auto& f = mesh.faces[face];
  const Eigen::Vector3d e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
  const Eigen::Vector3d e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
  return 0.5 * e1.cross(e2).norm();
}

std::size_t TexturedMesh::remove_degenerate_faces() {
  std::size_t kept = 0;
  const std::size_t before = faces.size();
  for (std::size_t i = 0; i < faces.size(); ++i) {
    if (face_area(*this, i) <= 1e-12) continue;
    faces[kept] = faces[i];
    if (!textures.empty()) textures[kept] = std::move(textures[i]);
    ++kept;
  }
  faces.resize(kept);
  if (!textures.empty()) textures.resize(kept);
  return before - kept;
}

namespace {

int parse_index(const std::string& token, int vertex_count, int line_no) {
  const std::string head = token.substr(0, token.find('/'));
  int idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stoi(head, &used);
    if (used != head.size()) throw std::invalid_argument(head);
  } catch (const std::exception&) {
    throw DataError("OBJ line " + std::to_string(line_no) + ": bad face index '" + token + "'");
  }
  const int resolved = idx > 0 ? idx - 1 : vertex_count + idx;
  if (idx == 0 || resolved < 0 || resolved >= vertex_count) {
    throw DataError("OBJ line " + std::to_string(line_no) + ": face index " + std::to_string(idx) + " out of range");
  }
  return resolved;
}

}  // namespace

TexturedMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open mesh " + path.string());
  TexturedMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw DataError("OBJ line " + std::to_string(line_no) + ": malformed vertex");
      mesh.vertices.emplace_back(x, y, z);
      double r, g, b;
      if (ls >> r >> g >> b) {
        auto to8 = [](double c) { return static_cast<std::uint8_t>(std::clamp(std::lround(c * 255.0), 0L, 255L)); };
        mesh.colors.push_back({to8(r), to8(g), to8(b)});
      } else {
        mesh.colors.push_back({200, 200, 200});
      }
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string token;
      const int n = static_cast<int>(mesh.vertices.size());
      while (ls >> token) poly.push_back(parse_index(token, n, line_no));
      if (poly.size() < 3) throw DataError("OBJ line " + std::to_string(line_no) + ": face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
    }
  }
  mesh.validate();
  mesh.remove_degenerate_faces();
  return mesh;
}

void write_obj(const std::filesystem::path& path, const TexturedMesh& mesh) {
  mesh.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write mesh " + path.string());
  char buf[160];
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    const Rgb c = mesh.colors[i];
    std::snprintf(buf, sizeof(buf), "v %.6f %.6f %.6f %.6f %.6f %.6f\n", v.x(), v.y(), v.z(), c.r / 255.0, c.g / 255.0,
                  c.b / 255.0);
    out << buf;
  }
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

}  // namespace synthloc
