#include "scenes.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include <unistd.h>

#include <Eigen/Geometry>

#include "stereoref/dataset_io.hpp"

namespace stereoref::testing {

RectifiedRig make_rig(double f, double cx1, double cy, double cx2, double tx, int width, int height) {
  RigParams p;
  p.f = f;
  p.cx1 = cx1;
  p.cy1 = cy;
  p.cx2 = cx2;
  p.cy2 = cy;
  p.tx = tx;
  p.width = width;
  p.height = height;
  return RectifiedRig(p);
}

RectifiedRig plane_rig() { return make_rig(500, 320, 256, 320, 5, 640, 512); }

TriangleMesh rectangle(double x0, double x1, double y0, double y1, double z, int nx, int ny) {
  TriangleMesh m;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      m.vertices.emplace_back(x0 + (x1 - x0) * i / nx, y0 + (y1 - y0) * j / ny, z);
  auto id = [nx](int i, int j) { return static_cast<std::uint32_t>(j * (nx + 1) + i); };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return m;
}

void append(TriangleMesh& a, const TriangleMesh& b) {
  const auto base = static_cast<std::uint32_t>(a.vertices.size());
  a.vertices.insert(a.vertices.end(), b.vertices.begin(), b.vertices.end());
  for (auto t : b.triangles) a.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
  if (a.has_colors() || b.has_colors()) {
    a.colors.resize(base, Vec3(0.5, 0.5, 0.5));
    if (b.has_colors()) a.colors.insert(a.colors.end(), b.colors.begin(), b.colors.end());
    else a.colors.resize(a.vertices.size(), Vec3(0.5, 0.5, 0.5));
  }
}

TriangleMesh strip_scene(double z_bg, double z_fg, double strip_x0, double strip_x1) {
  TriangleMesh m = rectangle(-4 * z_bg, 4 * z_bg, -4 * z_bg, 4 * z_bg, z_bg);
  append(m, rectangle(strip_x0, strip_x1, -4 * z_bg, 4 * z_bg, z_fg, 1, 4));
  return m;
}

TriangleMesh icosphere(const Vec3& center, double radius, int levels) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<std::uint32_t, 3>> f = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (int level = 0; level < levels; ++level) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      if (auto it = mid.find(key); it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const auto id = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<std::uint32_t, 3>> next;
    for (auto [a, b, c] : f) {
      const auto ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
      next.push_back({a, ab, ca});
      next.push_back({b, bc, ab});
      next.push_back({c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  TriangleMesh m;
  for (const auto& p : v) m.vertices.push_back(center + radius * p);
  m.triangles = std::move(f);
  return m;
}

TriangleMesh wavy_surface(double base, double amplitude, double wx, double wy, double half, int n) {
  TriangleMesh m = rectangle(-half, half, -half, half, base, n, n);
  for (auto& p : m.vertices) p.z() = base + amplitude * std::sin(p.x() / wx) * std::cos(p.y() / wy);
  return m;
}

TriangleMesh transformed(const TriangleMesh& mesh, const RigidTransform& pose) {
  TriangleMesh out = mesh;
  for (auto& p : out.vertices) p = pose.rotation() * p + pose.translation();
  return out;
}

std::optional<double> ray_hit(const TriangleMesh& m, const Vec3& origin, const Vec3& dir) {
  std::optional<double> best;
  for (const auto& t : m.triangles) {
    const Vec3& a = m.vertices[t[0]];
    const Vec3 e1 = m.vertices[t[1]] - a;
    const Vec3 e2 = m.vertices[t[2]] - a;
    const Vec3 p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-15) continue;
    const Vec3 s = origin - a;
    const double u = s.dot(p) / det;
    if (u < 0 || u > 1) continue;
    const Vec3 q = s.cross(e1);
    const double w = dir.dot(q) / det;
    if (w < 0 || u + w > 1) continue;
    const double dist = e2.dot(q) / det;
    if (dist > 1e-9 && (!best || dist < *best)) best = dist;
  }
  return best;
}

std::optional<Vec3> ray_cast(const TriangleMesh& mesh, const RigidTransform& pose, const RectifiedRig& rig, Eye eye,
                             double x, double y) {
  const TriangleMesh cam = transformed(mesh, pose);
  // Left eye at the origin with principal point (cx1, cy1). The right eye is
  // displaced by tx along X and shares the left image's principal column, so
  // that u_r = u_l - tx f / Z.
  const Vec3 origin = eye == Eye::left ? Vec3::Zero() : Vec3(rig.tx(), 0, 0);
  const double cy = eye == Eye::left ? rig.cy1() : rig.cy2();
  const Vec3 dir((x - rig.cx1()) / rig.f(), (y - cy) / rig.f(), 1.0);
  const auto hit = ray_hit(cam, origin, dir);
  if (!hit) return std::nullopt;
  return origin + *hit * dir;
}

Mat3 axis_angle(const Vec3& axis, double angle) { return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(); }

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Vec3 v;
  do v = Vec3(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-6);
  return v.normalized();
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

Mat3 random_small_rotation(std::mt19937_64& rng, double max_angle) {
  std::uniform_real_distribution<double> u(0, max_angle);
  return axis_angle(random_unit(rng), u(rng));
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("stereoref_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string TempDir::str(const std::string& child) const {
  return child.empty() ? path_.string() : (path_ / child).string();
}

void write_calibration(const std::string& path, const RectifiedRig& rig, const std::string& id) {
  const StereoMatrices m = build_matrices(rig);
  std::ofstream out(path);
  auto mat = [&](const auto& a) {
    out << '[';
    for (int r = 0; r < a.rows(); ++r) {
      out << (r ? "," : "") << '[';
      for (int c = 0; c < a.cols(); ++c) out << (c ? "," : "") << a(r, c);
      out << ']';
    }
    out << ']';
  };
  out.precision(17);
  out << "{\"" << id << "\": {\"P1\": ";
  mat(m.p1);
  out << ", \"P2\": ";
  mat(m.p2);
  out << ", \"Q\": ";
  mat(m.q);
  out << ", \"width\": " << rig.width() << ", \"height\": " << rig.height() << "}}\n";
}

}  // namespace stereoref::testing
