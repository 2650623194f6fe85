#include "stereoref/render.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <thread>

#include <Eigen/Geometry>

#include "stereoref/errors.hpp"

namespace stereoref {

namespace {

// Intrinsics of one eye plus its offset from the left camera along X.
struct EyeCamera {
  double f;
  double cx;
  double cy;
  double offset_x;

  Vec3 to_eye(const Vec3& left_cam) const { return {left_cam.x() - offset_x, left_cam.y(), left_cam.z()}; }
  // Window coordinates: pixel (x, y) covers [x, x+1) x [y, y+1).
  Vec2 to_window(const Vec3& p) const { return {f * p.x() / p.z() + cx + 0.5, f * p.y() / p.z() + cy + 0.5}; }
  Vec3 ray(int x, int y) const { return {(x - cx) / f, (y - cy) / f, 1.0}; }
};

EyeCamera eye_camera(const RectifiedRig& rig, Eye eye) {
  // Must agree with project_point.
  if (eye == Eye::left) return {rig.f(), rig.cx1(), rig.cy1(), 0.0};
  return {rig.f(), rig.cx1(), rig.cy2(), rig.tx()};
}

struct ScreenTriangle {
  Vec2 p[3];
  double z[3];
  std::int32_t id;
  int x0, x1, y0, y1;  // inclusive pixel bounds, already clamped to the image
};

double raw_edge(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

bool lex_less(const Vec2& a, const Vec2& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); }

// Evaluated in a canonical vertex order so that the two triangles sharing an
// edge see exactly opposite values.
double edge(const Vec2& a, const Vec2& b, const Vec2& p) {
  return lex_less(a, b) ? raw_edge(a, b, p) : -raw_edge(b, a, p);
}

// Top-left ownership: of the two directions an edge is traversed in, exactly
// one owns the pixels lying on it.
bool owns_edge(const Vec2& a, const Vec2& b) {
  return b.y() > a.y() || (b.y() == a.y() && b.x() < a.x());
}

std::vector<Vec3> clip_near(const Vec3& a, const Vec3& b, const Vec3& c, double z_near) {
  const Vec3 in[3] = {a, b, c};
  std::vector<Vec3> out;
  out.reserve(4);
  for (int i = 0; i < 3; ++i) {
    const Vec3& cur = in[i];
    const Vec3& nxt = in[(i + 1) % 3];
    const bool cur_in = cur.z() >= z_near;
    const bool nxt_in = nxt.z() >= z_near;
    if (cur_in) out.push_back(cur);
    if (cur_in != nxt_in) {
      const double t = (z_near - cur.z()) / (nxt.z() - cur.z());
      Vec3 q = cur + t * (nxt - cur);
      q.z() = z_near;
      out.push_back(q);
    }
  }
  return out;
}

std::vector<ScreenTriangle> setup_triangles(const std::vector<Vec3>& eye_vertices, const TriangleMesh& mesh,
                                            const EyeCamera& cam, const RenderConfig& cfg, int width, int height) {
  std::vector<ScreenTriangle> out;
  out.reserve(mesh.triangles.size());
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    const Vec3& a = eye_vertices[t[0]];
    const Vec3& b = eye_vertices[t[1]];
    const Vec3& c = eye_vertices[t[2]];
    if (a.z() < cfg.z_near && b.z() < cfg.z_near && c.z() < cfg.z_near) continue;
    if (a.z() > cfg.z_far && b.z() > cfg.z_far && c.z() > cfg.z_far) continue;

    const std::vector<Vec3> poly = clip_near(a, b, c, cfg.z_near);
    for (std::size_t k = 2; k < poly.size(); ++k) {
      const Vec3* v[3] = {&poly[0], &poly[k - 1], &poly[k]};
      ScreenTriangle st;
      for (int j = 0; j < 3; ++j) {
        st.p[j] = cam.to_window(*v[j]);
        st.z[j] = normalize_depth(v[j]->z(), cfg.z_near, cfg.z_far);
      }
      const double area = edge(st.p[0], st.p[1], st.p[2]);
      if (area == 0 || !std::isfinite(area)) continue;
      if (area < 0) {
        std::swap(st.p[1], st.p[2]);
        std::swap(st.z[1], st.z[2]);
      }
      st.id = static_cast<std::int32_t>(i);
      const double minx = std::min({st.p[0].x(), st.p[1].x(), st.p[2].x()});
      const double maxx = std::max({st.p[0].x(), st.p[1].x(), st.p[2].x()});
      const double miny = std::min({st.p[0].y(), st.p[1].y(), st.p[2].y()});
      const double maxy = std::max({st.p[0].y(), st.p[1].y(), st.p[2].y()});
      if (maxx < 0 || maxy < 0 || minx > width || miny > height) continue;
      st.x0 = std::max(0, static_cast<int>(std::floor(minx - 0.5)));
      st.x1 = std::min(width - 1, static_cast<int>(std::ceil(maxx - 0.5)));
      st.y0 = std::max(0, static_cast<int>(std::floor(miny - 0.5)));
      st.y1 = std::min(height - 1, static_cast<int>(std::ceil(maxy - 0.5)));
      if (st.x0 > st.x1 || st.y0 > st.y1) continue;
      out.push_back(st);
    }
  }
  return out;
}

void raster_rows(const std::vector<ScreenTriangle>& tris, int width, int row0, int row1, std::vector<double>& z_gl,
                 std::vector<std::int32_t>& owner) {
  for (const ScreenTriangle& t : tris) {
    const int y0 = std::max(t.y0, row0);
    const int y1 = std::min(t.y1, row1 - 1);
    if (y0 > y1) continue;
    const double area = edge(t.p[0], t.p[1], t.p[2]);
    const bool own12 = owns_edge(t.p[1], t.p[2]);
    const bool own20 = owns_edge(t.p[2], t.p[0]);
    const bool own01 = owns_edge(t.p[0], t.p[1]);
    for (int y = y0; y <= y1; ++y) {
      for (int x = t.x0; x <= t.x1; ++x) {
        const Vec2 s(x + 0.5, y + 0.5);
        const double e12 = edge(t.p[1], t.p[2], s);
        const double e20 = edge(t.p[2], t.p[0], s);
        const double e01 = edge(t.p[0], t.p[1], s);
        if (e12 < 0 || e20 < 0 || e01 < 0) continue;
        if ((e12 == 0 && !own12) || (e20 == 0 && !own20) || (e01 == 0 && !own01)) continue;
        const double z = (e12 * t.z[0] + e20 * t.z[1] + e01 * t.z[2]) / area;
        if (z < 0.0 || z > 1.0) continue;
        const std::size_t idx = static_cast<std::size_t>(y) * width + x;
        const double cur = z_gl[idx];
        if (z < cur - 1e-12 || (std::abs(z - cur) <= 1e-12 && (owner[idx] < 0 || t.id < owner[idx]))) {
          z_gl[idx] = z;
          owner[idx] = t.id;
        }
      }
    }
  }
}

std::vector<Vec3> eye_vertices(const TriangleMesh& mesh, const EyeCamera& cam, const RigidTransform& pose) {
  std::vector<Vec3> out;
  out.reserve(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) out.push_back(cam.to_eye(pose.apply(v)));
  return out;
}

std::uint8_t to_byte(double c) { return static_cast<std::uint8_t>(std::clamp(std::lround(c * 255.0), 0L, 255L)); }

Rgb8 to_rgb(const Vec3& c) { return {to_byte(c.x()), to_byte(c.y()), to_byte(c.z())}; }

std::uint8_t blend(std::uint8_t bg, std::uint8_t fg, double alpha) {
  const double v = bg + alpha * (static_cast<double>(fg) - bg);
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Möller-Trumbore: barycentric weights of the ray's hit on triangle (a, b, c).
Vec3 ray_barycentric(const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 pv = dir.cross(e2);
  const double det = e1.dot(pv);
  if (std::abs(det) < 1e-300) return {1.0 / 3, 1.0 / 3, 1.0 / 3};
  const Vec3 tv = -a;  // ray origin is the eye centre
  const double u = tv.dot(pv) / det;
  const Vec3 qv = tv.cross(e1);
  const double v = dir.dot(qv) / det;
  Vec3 w(1 - u - v, u, v);
  w = w.cwiseMax(0.0);
  return w / w.sum();
}

const Vec3 kFlatBaseColor{0.90, 0.78, 0.66};
const Vec3 kLineColor{0.30, 1.00, 0.30};

}  // namespace

void RenderConfig::validate() const {
  if (!(z_near > 0) || !(z_far > z_near) || !std::isfinite(z_far))
    throw InvalidArgument("render config: need 0 < z_near < z_far");
  if (!(alpha >= 0 && alpha <= 1)) throw InvalidArgument("render config: alpha must be in [0, 1]");
  if (threads < 0) throw InvalidArgument("render config: threads must be non-negative");
}

double linearize_depth(double z_gl, double z_near, double z_far) {
  if (!(z_gl >= 0.0 && z_gl <= 1.0)) throw InvalidArgument("linearize_depth: z_gl outside [0, 1]");
  return -2.0 * z_near * z_far / (2.0 * (z_gl - 0.5) * (z_far - z_near) - z_near - z_far);
}

double normalize_depth(double z, double z_near, double z_far) {
  return 0.5 + (z_near + z_far - 2.0 * z_near * z_far / z) / (2.0 * (z_far - z_near));
}

namespace detail {

RasterResult rasterize(const TriangleMesh& mesh, const RectifiedRig& rig, Eye eye, const RigidTransform& pose,
                       const RenderConfig& config) {
  config.validate();
  const int w = rig.width();
  const int h = rig.height();
  RasterResult out;
  out.depth.width = w;
  out.depth.height = h;
  out.depth.z_near = config.z_near;
  out.depth.z_far = config.z_far;
  out.depth.z_gl.assign(static_cast<std::size_t>(w) * h, 1.0);
  out.triangle.assign(static_cast<std::size_t>(w) * h, -1);
  if (mesh.empty()) return out;
  validate(mesh);

  const EyeCamera cam = eye_camera(rig, eye);
  const std::vector<Vec3> verts = eye_vertices(mesh, cam, pose);
  const std::vector<ScreenTriangle> tris = setup_triangles(verts, mesh, cam, config, w, h);

  constexpr int kBandRows = 16;
  const int bands = (h + kBandRows - 1) / kBandRows;
  int workers = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, std::max(1, bands));

  std::atomic<int> next{0};
  auto work = [&] {
    for (int b = next++; b < bands; b = next++)
      raster_rows(tris, w, b * kBandRows, std::min(h, (b + 1) * kBandRows), out.depth.z_gl, out.triangle);
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
  }
  return out;
}

}  // namespace detail

DepthBuffer rasterize_depth(const TriangleMesh& mesh, const RectifiedRig& rig, Eye eye, const RigidTransform& pose,
                            const RenderConfig& config) {
  return detail::rasterize(mesh, rig, eye, pose, config).depth;
}

ColorImage render_overlay(const TriangleMesh& mesh, const RectifiedRig& rig, Eye eye, const RigidTransform& pose,
                          const RenderConfig& config, const ColorImage& background) {
  config.validate();
  if (background.width() != rig.width() || background.height() != rig.height())
    throw InvalidArgument("render_overlay: background size does not match the rig");
  if (config.alpha == 0.0 || mesh.empty()) return background;

  const int w = rig.width();
  const int h = rig.height();
  const EyeCamera cam = eye_camera(rig, eye);
  const detail::RasterResult raster = detail::rasterize(mesh, rig, eye, pose, config);
  const std::vector<Vec3> verts = eye_vertices(mesh, cam, pose);

  Raster<Rgb8> layer(w, h);
  Raster<std::uint8_t> coverage(w, h, 0);

  // Depth test for lines and points against the solid surface.
  auto visible = [&](int x, int y, double z) {
    const double zb = raster.depth.at(x, y);
    if (zb >= 1.0) return true;
    const double surface = linearize_depth(zb, config.z_near, config.z_far);
    return z <= surface * (1.0 + 1e-3) + 0.01;
  };
  auto plot = [&](int x, int y, double z, const Vec3& color) {
    if (!layer.contains(x, y) || z < config.z_near || z > config.z_far || !visible(x, y, z)) return;
    layer(x, y) = to_rgb(color);
    coverage(x, y) = 1;
  };

  switch (config.mode) {
    case RenderMode::solid:
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::int32_t id = raster.triangle[static_cast<std::size_t>(y) * w + x];
          if (id < 0) continue;
          const auto& t = mesh.triangles[id];
          const Vec3& a = verts[t[0]];
          const Vec3& b = verts[t[1]];
          const Vec3& c = verts[t[2]];
          const Vec3 dir = cam.ray(x, y);
          Vec3 color;
          if (mesh.has_colors()) {
            const Vec3 bc = ray_barycentric(dir, a, b, c);
            color = bc.x() * mesh.colors[t[0]] + bc.y() * mesh.colors[t[1]] + bc.z() * mesh.colors[t[2]];
          } else {
            const Vec3 n = (b - a).cross(c - a).normalized();
            color = kFlatBaseColor * (0.2 + 0.8 * std::abs(n.dot(dir.normalized())));
          }
          layer(x, y) = to_rgb(color);
          coverage(x, y) = 1;
        }
      }
      break;
    case RenderMode::wireframe: {
      std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
      for (const auto& t : mesh.triangles)
        for (int k = 0; k < 3; ++k) edges.insert(std::minmax(t[k], t[(k + 1) % 3]));
      for (const auto& [i0, i1] : edges) {
        Vec3 p = verts[i0];
        Vec3 q = verts[i1];
        if (p.z() < config.z_near && q.z() < config.z_near) continue;
        const Vec3 cp = mesh.has_colors() ? mesh.colors[i0] : kLineColor;
        const Vec3 cq = mesh.has_colors() ? mesh.colors[i1] : kLineColor;
        if (p.z() < config.z_near) p = p + (config.z_near - p.z()) / (q.z() - p.z()) * (q - p);
        if (q.z() < config.z_near) q = q + (config.z_near - q.z()) / (p.z() - q.z()) * (p - q);
        const Vec2 sp = cam.to_window(p);
        const Vec2 sq = cam.to_window(q);
        const double len = (sq - sp).norm();
        if (len > 4.0 * (w + h)) continue;
        const int steps = std::max(1, static_cast<int>(std::ceil(len * 2.0)));
        for (int s = 0; s <= steps; ++s) {
          const double a = static_cast<double>(s) / steps;
          const Vec2 sw = sp + a * (sq - sp);
          // 1/Z is affine in screen space.
          const double inv_z = (1 - a) / p.z() + a / q.z();
          const double t3 = (a / q.z()) / inv_z;
          plot(static_cast<int>(std::floor(sw.x())), static_cast<int>(std::floor(sw.y())), 1.0 / inv_z,
               (1 - t3) * cp + t3 * cq);
        }
      }
      break;
    }
    case RenderMode::points:
      for (std::size_t i = 0; i < verts.size(); ++i) {
        const Vec3& p = verts[i];
        if (p.z() < config.z_near) continue;
        const Vec2 s = cam.to_window(p);
        plot(static_cast<int>(std::floor(s.x())), static_cast<int>(std::floor(s.y())), p.z(),
             mesh.has_colors() ? mesh.colors[i] : kLineColor);
      }
      break;
  }

  ColorImage out = background;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!coverage(x, y)) continue;
      const Rgb8 bg = background(x, y);
      const Rgb8 fg = layer(x, y);
      out(x, y) = {blend(bg.r, fg.r, config.alpha), blend(bg.g, fg.g, config.alpha), blend(bg.b, fg.b, config.alpha)};
    }
  }
  return out;
}

TriangleMesh project_texture(const ColorImage& image, const RectifiedRig& rig, Eye eye, const RigidTransform& pose,
                             const TriangleMesh& mesh, const RenderConfig& config, double visibility_margin) {
  if (image.width() != rig.width() || image.height() != rig.height())
    throw InvalidArgument("project_texture: image size does not match the rig");
  const EyeCamera cam = eye_camera(rig, eye);
  const DepthBuffer depth = rasterize_depth(mesh, rig, eye, pose, config);
  const std::vector<Vec3> verts = eye_vertices(mesh, cam, pose);
  const int w = rig.width();
  const int h = rig.height();

  auto channel = [&](int x, int y, int c) -> double {
    const Rgb8 p = image(x, y);
    return c == 0 ? p.r : (c == 1 ? p.g : p.b);
  };

  TriangleMesh out = mesh;
  out.colors.assign(mesh.vertices.size(), kUnseenColor);
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const Vec3& p = verts[i];
    if (p.z() < config.z_near || p.z() > config.z_far) continue;
    const double u = cam.f * p.x() / p.z() + cam.cx;
    const double v = cam.f * p.y() / p.z() + cam.cy;
    if (!(u >= 0 && v >= 0 && u <= w - 1 && v <= h - 1)) continue;
    const int nx = static_cast<int>(std::lround(u));
    const int ny = static_cast<int>(std::lround(v));
    const double zb = depth.at(nx, ny);
    if (zb < 1.0 && p.z() - linearize_depth(zb, config.z_near, config.z_far) > visibility_margin) continue;

    const int x0 = std::min(static_cast<int>(std::floor(u)), w - 2 < 0 ? 0 : w - 2);
    const int y0 = std::min(static_cast<int>(std::floor(v)), h - 2 < 0 ? 0 : h - 2);
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = u - x0;
    const double fy = v - y0;
    Vec3 c;
    for (int k = 0; k < 3; ++k) {
      c[k] = ((1 - fx) * (1 - fy) * channel(x0, y0, k) + fx * (1 - fy) * channel(x1, y0, k) +
              (1 - fx) * fy * channel(x0, y1, k) + fx * fy * channel(x1, y1, k)) /
             255.0;
    }
    out.colors[i] = c;
  }
  return out;
}

}  // namespace stereoref
