#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "stereoref/errors.hpp"
#include "stereoref/mesh.hpp"

namespace stereoref {

namespace {

namespace fs = std::filesystem;

enum class PlyFormat { ascii, binary_le, binary_be };

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f32;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

PlyType parse_type(const std::string& s, const std::string& path) {
  static const std::map<std::string, PlyType> kTypes = {
      {"char", PlyType::i8},     {"int8", PlyType::i8},     {"uchar", PlyType::u8},   {"uint8", PlyType::u8},
      {"short", PlyType::i16},   {"int16", PlyType::i16},   {"ushort", PlyType::u16}, {"uint16", PlyType::u16},
      {"int", PlyType::i32},     {"int32", PlyType::i32},   {"uint", PlyType::u32},   {"uint32", PlyType::u32},
      {"float", PlyType::f32},   {"float32", PlyType::f32}, {"double", PlyType::f64}, {"float64", PlyType::f64}};
  auto it = kTypes.find(s);
  if (it == kTypes.end()) throw FileError(FileError::Kind::malformed, path, "unknown PLY type '" + s + "'");
  return it->second;
}

std::size_t type_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

class PlyReader {
 public:
  PlyReader(std::istream& in, PlyFormat format, std::string path)
      : in_(in), format_(format), path_(std::move(path)) {}

  double read(PlyType t) {
    if (format_ == PlyFormat::ascii) {
      double v;
      if (!(in_ >> v)) fail("truncated ASCII data");
      return v;
    }
    unsigned char buf[8];
    const auto n = type_size(t);
    if (!in_.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n))) fail("truncated binary data");
    const bool swap = (format_ == PlyFormat::binary_be) == (std::endian::native == std::endian::little);
    if (swap) std::reverse(buf, buf + n);
    switch (t) {
      case PlyType::i8: return static_cast<std::int8_t>(buf[0]);
      case PlyType::u8: return buf[0];
      case PlyType::i16: return load<std::int16_t>(buf);
      case PlyType::u16: return load<std::uint16_t>(buf);
      case PlyType::i32: return load<std::int32_t>(buf);
      case PlyType::u32: return load<std::uint32_t>(buf);
      case PlyType::f32: return load<float>(buf);
      case PlyType::f64: return load<double>(buf);
    }
    return 0;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FileError(FileError::Kind::malformed, path_, what);
  }

 private:
  template <class T>
  static double load(const unsigned char* p) {
    T v;
    std::memcpy(&v, p, sizeof v);
    return static_cast<double>(v);
  }

  std::istream& in_;
  PlyFormat format_;
  std::string path_;
};

std::ifstream open_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(FileError::Kind::missing, path.string(), "cannot open mesh file");
  return in;
}

}  // namespace

TriangleMesh read_ply(const fs::path& path) {
  const std::string p = path.string();
  std::ifstream in = open_binary(path);

  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
    throw FileError(FileError::Kind::malformed, p, "missing 'ply' magic");

  PlyFormat format = PlyFormat::ascii;
  std::vector<PlyElement> elements;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string f;
      ls >> f;
      if (f == "ascii") format = PlyFormat::ascii;
      else if (f == "binary_little_endian") format = PlyFormat::binary_le;
      else if (f == "binary_big_endian") format = PlyFormat::binary_be;
      else throw FileError(FileError::Kind::malformed, p, "unknown PLY format '" + f + "'");
    } else if (kw == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      if (!ls) throw FileError(FileError::Kind::malformed, p, "bad element line");
      elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (elements.empty()) throw FileError(FileError::Kind::malformed, p, "property before element");
      PlyProperty prop;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, it;
        ls >> ct >> it >> prop.name;
        prop.is_list = true;
        prop.count_type = parse_type(ct, p);
        prop.type = parse_type(it, p);
      } else {
        prop.type = parse_type(t, p);
        ls >> prop.name;
      }
      elements.back().properties.push_back(prop);
    } else if (kw == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw FileError(FileError::Kind::malformed, p, "missing end_header");

  TriangleMesh mesh;
  PlyReader reader(in, format, p);
  bool have_color = false;
  for (const PlyElement& e : elements) {
    if (e.name == "vertex") {
      int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
      for (int k = 0; k < static_cast<int>(e.properties.size()); ++k) {
        const auto& n = e.properties[k].name;
        if (n == "x") ix = k;
        else if (n == "y") iy = k;
        else if (n == "z") iz = k;
        else if (n == "red" || n == "r") ir = k;
        else if (n == "green" || n == "g") ig = k;
        else if (n == "blue" || n == "b") ib = k;
      }
      if (ix < 0 || iy < 0 || iz < 0) reader.fail("vertex element lacks x/y/z");
      have_color = ir >= 0 && ig >= 0 && ib >= 0;
      mesh.vertices.resize(e.count);
      if (have_color) mesh.colors.resize(e.count);
      std::vector<double> vals(e.properties.size());
      for (std::size_t i = 0; i < e.count; ++i) {
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
          const auto& prop = e.properties[k];
          if (prop.is_list) {
            const auto n = static_cast<std::size_t>(reader.read(prop.count_type));
            for (std::size_t j = 0; j < n; ++j) reader.read(prop.type);
            vals[k] = 0;
          } else {
            vals[k] = reader.read(prop.type);
          }
        }
        mesh.vertices[i] = Vec3(vals[ix], vals[iy], vals[iz]);
        if (have_color) {
          const bool bytes = e.properties[ir].type == PlyType::u8;
          const double scale = bytes ? 1.0 / 255.0 : 1.0;
          mesh.colors[i] = Vec3(vals[ir], vals[ig], vals[ib]) * scale;
        }
      }
    } else if (e.name == "face") {
      int il = -1;
      for (int k = 0; k < static_cast<int>(e.properties.size()); ++k) {
        const auto& n = e.properties[k].name;
        if (e.properties[k].is_list && (n == "vertex_indices" || n == "vertex_index")) il = k;
      }
      if (il < 0) reader.fail("face element lacks vertex_indices");
      std::vector<std::uint32_t> poly;
      for (std::size_t i = 0; i < e.count; ++i) {
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
          const auto& prop = e.properties[k];
          if (!prop.is_list) {
            reader.read(prop.type);
            continue;
          }
          const auto n = static_cast<std::size_t>(reader.read(prop.count_type));
          poly.clear();
          for (std::size_t j = 0; j < n; ++j) {
            const double idx = reader.read(prop.type);
            if (idx < 0) reader.fail("negative vertex index");
            poly.push_back(static_cast<std::uint32_t>(idx));
          }
          if (static_cast<int>(k) != il) continue;
          for (std::size_t j = 2; j < poly.size(); ++j) mesh.triangles.push_back({poly[0], poly[j - 1], poly[j]});
        }
      }
    } else {
      for (std::size_t i = 0; i < e.count; ++i) {
        for (const auto& prop : e.properties) {
          if (prop.is_list) {
            const auto n = static_cast<std::size_t>(reader.read(prop.count_type));
            for (std::size_t j = 0; j < n; ++j) reader.read(prop.type);
          } else {
            reader.read(prop.type);
          }
        }
      }
    }
  }

  for (const auto& t : mesh.triangles)
    for (auto idx : t)
      if (idx >= mesh.vertices.size()) reader.fail("face index past vertex count");
  drop_degenerate_triangles(mesh);
  return mesh;
}

TriangleMesh read_stl(const fs::path& path) {
  const std::string p = path.string();
  std::ifstream in = open_binary(path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  TriangleMesh mesh;
  std::map<std::array<double, 3>, std::uint32_t> index;
  auto add_vertex = [&](const Vec3& v) {
    const std::array<double, 3> key{v.x(), v.y(), v.z()};
    auto [it, inserted] = index.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
    if (inserted) mesh.vertices.push_back(v);
    return it->second;
  };

  bool binary = false;
  if (bytes.size() >= 84) {
    std::uint32_t n;
    std::memcpy(&n, bytes.data() + 80, 4);
    binary = bytes.size() == 84 + 50ull * n;
  }

  if (binary) {
    std::uint32_t n;
    std::memcpy(&n, bytes.data() + 80, 4);
    for (std::uint32_t i = 0; i < n; ++i) {
      const char* rec = bytes.data() + 84 + 50ull * i;
      std::array<std::uint32_t, 3> tri;
      for (int k = 0; k < 3; ++k) {
        float xyz[3];
        std::memcpy(xyz, rec + 12 + 12 * k, 12);
        tri[k] = add_vertex(Vec3(xyz[0], xyz[1], xyz[2]));
      }
      mesh.triangles.push_back(tri);
    }
  } else {
    std::istringstream ss(bytes);
    std::string tok;
    ss >> tok;
    if (tok != "solid") throw FileError(FileError::Kind::malformed, p, "neither binary nor ASCII STL");
    std::vector<std::uint32_t> loop;
    while (ss >> tok) {
      if (tok == "vertex") {
        double x, y, z;
        if (!(ss >> x >> y >> z)) throw FileError(FileError::Kind::malformed, p, "bad vertex line");
        loop.push_back(add_vertex(Vec3(x, y, z)));
      } else if (tok == "endloop") {
        for (std::size_t j = 2; j < loop.size(); ++j) mesh.triangles.push_back({loop[0], loop[j - 1], loop[j]});
        loop.clear();
      }
    }
  }
  drop_degenerate_triangles(mesh);
  return mesh;
}

TriangleMesh read_mesh(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".ply") return read_ply(path);
  if (ext == ".stl") return read_stl(path);
  throw FileError(FileError::Kind::malformed, path.string(), "unsupported mesh extension (expected .ply or .stl)");
}

void write_ply(const fs::path& path, const TriangleMesh& mesh, bool binary) {
  validate(mesh);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError(FileError::Kind::io, path.string(), "cannot open for writing");
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (mesh.has_colors()) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar uint vertex_indices\nend_header\n";

  auto to_byte = [](double c) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(c * 255.0), 0L, 255L));
  };
  if (binary) {
    static_assert(std::endian::native == std::endian::little, "binary PLY writer assumes a little-endian host");
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      const double xyz[3] = {mesh.vertices[i].x(), mesh.vertices[i].y(), mesh.vertices[i].z()};
      out.write(reinterpret_cast<const char*>(xyz), sizeof xyz);
      if (mesh.has_colors()) {
        const std::uint8_t rgb[3] = {to_byte(mesh.colors[i].x()), to_byte(mesh.colors[i].y()),
                                     to_byte(mesh.colors[i].z())};
        out.write(reinterpret_cast<const char*>(rgb), 3);
      }
    }
    for (const auto& t : mesh.triangles) {
      const std::uint8_t n = 3;
      out.write(reinterpret_cast<const char*>(&n), 1);
      out.write(reinterpret_cast<const char*>(t.data()), 12);
    }
  } else {
    out.precision(17);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      out << mesh.vertices[i].x() << ' ' << mesh.vertices[i].y() << ' ' << mesh.vertices[i].z();
      if (mesh.has_colors())
        out << ' ' << int(to_byte(mesh.colors[i].x())) << ' ' << int(to_byte(mesh.colors[i].y())) << ' '
            << int(to_byte(mesh.colors[i].z()));
      out << '\n';
    }
    for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  if (!out) throw FileError(FileError::Kind::io, path.string(), "write failed");
}

}  // namespace stereoref
