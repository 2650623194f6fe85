#include "stereoref/rig.hpp"

#include <cmath>
#include <string>

#include "stereoref/errors.hpp"

namespace stereoref {

RectifiedRig::RectifiedRig(const RigParams& params) : p_(params) {
  if (!(p_.f > 0) || !std::isfinite(p_.f)) throw InvalidArgument("rig: focal length must be positive");
  if (!(p_.tx > 0) || !std::isfinite(p_.tx)) throw InvalidArgument("rig: baseline term tx must be positive");
  if (p_.width <= 0 || p_.height <= 0) throw InvalidArgument("rig: image size must be positive");
  if (!std::isfinite(p_.cx1) || !std::isfinite(p_.cx2) || !std::isfinite(p_.cy1) || !std::isfinite(p_.cy2))
    throw InvalidArgument("rig: principal points must be finite");
  if (std::abs(p_.cy1 - p_.cy2) > 1e-9)
    throw InvalidArgument("rig: cy1 and cy2 differ; the pair is not row-rectified");
}

RectifiedRig RectifiedRig::from_projections(const Mat34& p1, const Mat34& p2, int width, int height) {
  RigParams r;
  r.f = p1(0, 0);
  r.cx1 = p1(0, 2);
  r.cy1 = p1(1, 2);
  r.cx2 = p2(0, 2);
  r.cy2 = p2(1, 2);
  if (std::abs(p1(1, 1) - r.f) > 1e-9 || std::abs(p2(0, 0) - r.f) > 1e-9 || std::abs(p2(1, 1) - r.f) > 1e-9)
    throw InvalidArgument("rig: P1/P2 do not share one focal length");
  r.tx = r.f > 0 ? std::abs(p2(0, 3)) / r.f : 0.0;
  r.width = width;
  r.height = height;
  return RectifiedRig(r);
}

StereoMatrices build_matrices(const RectifiedRig& rig) {
  const auto& p = rig.params();
  StereoMatrices m;
  m.p1 << p.f, 0, p.cx1, 0,
          0, p.f, p.cy1, 0,
          0, 0, 1, 0;
  m.p2 << p.f, 0, p.cx2, p.tx * p.f,
          0, p.f, p.cy2, 0,
          0, 0, 1, 0;
  m.q << 1, 0, 0, -p.cx1,
         0, 1, 0, -p.cy1,
         0, 0, 0, p.f,
         0, 0, 1.0 / p.tx, (p.cx1 - p.cx2) / p.tx;
  return m;
}

Vec3 reproject(const Mat4& q, double u, double v, double disparity) {
  const Eigen::Vector4d h = q * Eigen::Vector4d(u, v, disparity, 1.0);
  if (!(h.w() > 0)) throw DegenerateGeometry("reproject: point at infinity or behind the camera");
  return h.head<3>() / h.w();
}

double disparity_to_depth(const RectifiedRig& rig, double disparity) {
  const double denom = disparity + rig.principal_offset();
  if (!(denom > 0)) {
    throw DegenerateGeometry("disparity " + std::to_string(disparity) +
                             " maps to a point at infinity or behind the camera");
  }
  return rig.tx() * rig.f() / denom;
}

double depth_to_disparity(const RectifiedRig& rig, double z) {
  if (!(z > 0) || !std::isfinite(z)) throw InvalidArgument("depth must be positive and finite");
  return rig.tx() * rig.f() / z - rig.principal_offset();
}

Vec3 triangulate_pixel(const RectifiedRig& rig, double u, double v, double disparity) {
  const double z = disparity_to_depth(rig, disparity);
  return {(u - rig.cx1()) * z / rig.f(), (v - rig.cy1()) * z / rig.f(), z};
}

Vec2 project_point(const RectifiedRig& rig, Eye eye, const Vec3& point) {
  const double z = point.z();
  if (!(z > 0)) throw DegenerateGeometry("project_point: point is not in front of the camera");
  const double x = eye == Eye::left ? point.x() : point.x() - rig.tx();
  // Both eyes share the left principal column: the (cx2 - cx1) terms of the
  // disparity definition and of the correspondence rule cancel.
  const double cy = eye == Eye::left ? rig.cy1() : rig.cy2();
  return {rig.f() * x / z + rig.cx1(), rig.f() * point.y() / z + cy};
}

std::vector<Vec3> triangulate_chessboard(const RectifiedRig& rig, std::span<const Vec2> left,
                                         std::span<const Vec2> right, double row_tolerance) {
  if (left.size() != right.size()) throw InvalidArgument("triangulate_chessboard: list sizes differ");
  std::vector<Vec3> out;
  out.reserve(left.size());
  for (std::size_t i = 0; i < left.size(); ++i) {
    if (std::abs(left[i].y() - right[i].y()) > row_tolerance) {
      throw RectificationViolation("triangulate_chessboard: pair " + std::to_string(i) + " rows differ by " +
                                   std::to_string(std::abs(left[i].y() - right[i].y())) + " px");
    }
    const double d = left[i].x() - right[i].x() + (rig.cx2() - rig.cx1());
    out.push_back(triangulate_pixel(rig, left[i].x(), left[i].y(), d));
  }
  return out;
}

}  // namespace stereoref
