#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>

#include "synthloc/error.hpp"
#include "synthloc/geom/cloud.hpp"

namespace synthloc {

static_assert(std::endian::native == std::endian::little, "PLY binary I/O assumes a little-endian host");

void ColorPointCloud::validate() const {
  if (colors.size() != points.size()) throw DataError("point cloud colors/points length mismatch");
  if (!normals.empty()) {
    if (normals.size() != points.size()) throw DataError("point cloud normals/points length mismatch");
    for (const auto& n : normals) {
      if (std::abs(n.norm() - 1.0) > 1e-6) throw DataError("point cloud normal is not unit length");
    }
  }
}

namespace {

enum class ScalarType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

ScalarType parse_scalar_type(const std::string& name) {
  static const std::unordered_map<std::string, ScalarType> kTypes = {
      {"char", ScalarType::kInt8},     {"int8", ScalarType::kInt8},
      {"uchar", ScalarType::kUInt8},   {"uint8", ScalarType::kUInt8},
      {"short", ScalarType::kInt16},   {"int16", ScalarType::kInt16},
      {"ushort", ScalarType::kUInt16}, {"uint16", ScalarType::kUInt16},
      {"int", ScalarType::kInt32},     {"int32", ScalarType::kInt32},
      {"uint", ScalarType::kUInt32},   {"uint32", ScalarType::kUInt32},
      {"float", ScalarType::kFloat32}, {"float32", ScalarType::kFloat32},
      {"double", ScalarType::kFloat64}, {"float64", ScalarType::kFloat64}};
  const auto it = kTypes.find(name);
  if (it == kTypes.end()) throw DataError("unsupported PLY property type '" + name + "'");
  return it->second;
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8:
    case ScalarType::kUInt8: return 1;
    case ScalarType::kInt16:
    case ScalarType::kUInt16: return 2;
    case ScalarType::kInt32:
    case ScalarType::kUInt32:
    case ScalarType::kFloat32: return 4;
    case ScalarType::kFloat64: return 8;
  }
  return 0;
}

double read_binary_scalar(const char* p, ScalarType t) {
  switch (t) {
    case ScalarType::kInt8: return static_cast<double>(*reinterpret_cast<const std::int8_t*>(p));
    case ScalarType::kUInt8: return static_cast<double>(*reinterpret_cast<const std::uint8_t*>(p));
    case ScalarType::kInt16: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
    case ScalarType::kUInt16: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
    case ScalarType::kInt32: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::kUInt32: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::kFloat32: { float v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::kFloat64: { double v; std::memcpy(&v, p, 8); return v; }
  }
  return 0.0;
}

struct Property {
  std::string name;
  ScalarType type;
  bool is_list = false;
  ScalarType count_type = ScalarType::kUInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

std::uint8_t color_channel(double v, ScalarType t) {
  if (t == ScalarType::kFloat32 || t == ScalarType::kFloat64) v *= 255.0;
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

ColorPointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open point cloud " + path.string());

  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw DataError(path.string() + ": not a PLY file");

  bool ascii = false;
  std::vector<Element> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        ascii = true;
      } else if (fmt != "binary_little_endian") {
        throw DataError(path.string() + ": unsupported PLY format '" + fmt + "'");
      }
    } else if (keyword == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (keyword == "property") {
      if (elements.empty()) throw DataError(path.string() + ": property before element");
      Property p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> p.name;
        p.is_list = true;
        p.count_type = parse_scalar_type(count_type);
        p.type = parse_scalar_type(item_type);
      } else {
        p.type = parse_scalar_type(type);
        ls >> p.name;
      }
      elements.back().properties.push_back(p);
    } else if (keyword == "end_header") {
      break;
    }
  }

  const Element* vertex = nullptr;
  for (const auto& e : elements) {
    if (e.name == "vertex") {
      vertex = &e;
      break;
    }
    // Vertex data must come first for the streaming reader below.
    if (e.count > 0) throw DataError(path.string() + ": PLY elements before 'vertex' are not supported");
  }
  if (vertex == nullptr) throw DataError(path.string() + ": PLY has no vertex element");

  int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1, ir = -1, ig = -1, ib = -1;
  for (int i = 0; i < static_cast<int>(vertex->properties.size()); ++i) {
    const auto& n = vertex->properties[i].name;
    if (vertex->properties[i].is_list) throw DataError(path.string() + ": list property in vertex element");
    if (n == "x") ix = i;
    else if (n == "y") iy = i;
    else if (n == "z") iz = i;
    else if (n == "nx") inx = i;
    else if (n == "ny") iny = i;
    else if (n == "nz") inz = i;
    else if (n == "red" || n == "r") ir = i;
    else if (n == "green" || n == "g") ig = i;
    else if (n == "blue" || n == "b") ib = i;
  }
  if (ix < 0 || iy < 0 || iz < 0) throw DataError(path.string() + ": PLY vertex lacks x/y/z");
  const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;
  const bool has_colors = ir >= 0 && ig >= 0 && ib >= 0;

  const auto& props = vertex->properties;
  std::vector<double> row(props.size());
  ColorPointCloud cloud;
  cloud.points.reserve(vertex->count);
  cloud.colors.reserve(vertex->count);
  if (has_normals) cloud.normals.reserve(vertex->count);

  std::vector<std::size_t> offsets(props.size());
  std::size_t stride = 0;
  for (std::size_t i = 0; i < props.size(); ++i) {
    offsets[i] = stride;
    stride += scalar_size(props[i].type);
  }
  std::vector<char> buffer;
  if (!ascii) {
    buffer.resize(stride * vertex->count);
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (static_cast<std::size_t>(in.gcount()) != buffer.size()) {
      throw DataError(path.string() + ": truncated PLY vertex data");
    }
  }

  for (std::size_t v = 0; v < vertex->count; ++v) {
    if (ascii) {
      if (!std::getline(in, line)) throw DataError(path.string() + ": truncated PLY vertex data");
      std::istringstream ls(line);
      for (auto& value : row) {
        if (!(ls >> value)) {
          throw DataError(path.string() + ": malformed PLY vertex line " + std::to_string(v));
        }
      }
    } else {
      const char* base = buffer.data() + v * stride;
      for (std::size_t i = 0; i < props.size(); ++i) row[i] = read_binary_scalar(base + offsets[i], props[i].type);
    }
    cloud.points.emplace_back(row[ix], row[iy], row[iz]);
    if (has_colors) {
      cloud.colors.push_back({color_channel(row[ir], props[ir].type), color_channel(row[ig], props[ig].type),
                              color_channel(row[ib], props[ib].type)});
    } else {
      cloud.colors.push_back({255, 255, 255});
    }
    if (has_normals) {
      Eigen::Vector3d n(row[inx], row[iny], row[inz]);
      const double len = n.norm();
      if (!(len > 0.0) || !std::isfinite(len)) {
        throw DataError(path.string() + ": zero-length normal at vertex " + std::to_string(v));
      }
      cloud.normals.push_back(n / len);
    }
  }
  return cloud;
}

void write_ply(const std::filesystem::path& path, const ColorPointCloud& cloud, PlyFormat format) {
  cloud.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write point cloud " + path.string());
  const bool ascii = format == PlyFormat::kAscii;
  out << "ply\nformat " << (ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n";
  if (cloud.has_normals()) out << "property float nx\nproperty float ny\nproperty float nz\n";
  out << "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";

  if (ascii) {
    out.precision(9);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud.points[i];
      out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' ' << static_cast<float>(p.z());
      if (cloud.has_normals()) {
        const auto& n = cloud.normals[i];
        out << ' ' << static_cast<float>(n.x()) << ' ' << static_cast<float>(n.y()) << ' ' << static_cast<float>(n.z());
      }
      const Rgb c = cloud.colors[i];
      out << ' ' << int{c.r} << ' ' << int{c.g} << ' ' << int{c.b} << '\n';
    }
    return;
  }

  const std::size_t stride = cloud.has_normals() ? 27 : 15;
  std::vector<char> buffer(stride * cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    char* p = buffer.data() + i * stride;
    const float xyz[3] = {static_cast<float>(cloud.points[i].x()), static_cast<float>(cloud.points[i].y()),
                          static_cast<float>(cloud.points[i].z())};
    std::memcpy(p, xyz, 12);
    p += 12;
    if (cloud.has_normals()) {
      const float n[3] = {static_cast<float>(cloud.normals[i].x()), static_cast<float>(cloud.normals[i].y()),
                          static_cast<float>(cloud.normals[i].z())};
      std::memcpy(p, n, 12);
      p += 12;
    }
    p[0] = static_cast<char>(cloud.colors[i].r);
    p[1] = static_cast<char>(cloud.colors[i].g);
    p[2] = static_cast<char>(cloud.colors[i].b);
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
}

}  // namespace synthloc
