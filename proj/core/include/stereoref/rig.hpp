#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace stereoref {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

enum class Eye { left, right };

struct RigParams {
  double f = 0;    // focal length, px
  double cx1 = 0;  // left principal point, px
  double cy1 = 0;
  double cx2 = 0;  // right principal point, px
  double cy2 = 0;
  double tx = 0;   // baseline term, mm (positive)
  int width = 0;
  int height = 0;
};

// Rectified stereo pair.
//
// Image coordinates follow the usual pinhole convention: pixel (x, y) is
// centred on (u, v) = (x, y). Disparity is non-negative for visible points
// and relates to depth through
//
//     Z = tx * f / (d + (cx1 - cx2))
//
// A left pixel u corresponds to the right pixel u - d + (cx2 - cx1).
class RectifiedRig {
 public:
  // Throws InvalidArgument unless f, tx, width, height are positive and
  // |cy1 - cy2| <= 1e-9.
  explicit RectifiedRig(const RigParams& params);

  // Rebuilds the rig from the rectified projection matrices. The sign of
  // P2(0,3) is ignored, so calibrations storing a negative baseline term
  // (the OpenCV convention) load unchanged.
  static RectifiedRig from_projections(const Mat34& p1, const Mat34& p2, int width, int height);

  const RigParams& params() const { return p_; }
  double f() const { return p_.f; }
  double cx1() const { return p_.cx1; }
  double cy1() const { return p_.cy1; }
  double cx2() const { return p_.cx2; }
  double cy2() const { return p_.cy2; }
  double tx() const { return p_.tx; }
  int width() const { return p_.width; }
  int height() const { return p_.height; }

  // cx1 - cx2, the constant disparity offset.
  double principal_offset() const { return p_.cx1 - p_.cx2; }

 private:
  RigParams p_;
};

struct StereoMatrices {
  Mat34 p1;
  Mat34 p2;
  Mat4 q;
};

// P1, P2 and the reprojection matrix Q with last row
// [0, 0, 1/tx, (cx1 - cx2)/tx], so that Q * (u, v, d, 1) dehomogenises to the
// same point as triangulate_pixel.
StereoMatrices build_matrices(const RectifiedRig& rig);

// Dehomogenised Q * (u, v, d, 1). Throws DegenerateGeometry if w <= 0.
Vec3 reproject(const Mat4& q, double u, double v, double disparity);

// Throws DegenerateGeometry when d + (cx1 - cx2) <= 0.
double disparity_to_depth(const RectifiedRig& rig, double disparity);

// Throws InvalidArgument when z <= 0 or not finite.
double depth_to_disparity(const RectifiedRig& rig, double z);

// Point in left-camera coordinates (mm) seen at left pixel (u, v) with the
// given disparity.
Vec3 triangulate_pixel(const RectifiedRig& rig, double u, double v, double disparity);

// Pinhole projection of a left-camera-frame point into either eye. The right
// eye sits at (tx, 0, 0); its image obeys u_r = u_l - d + (cx2 - cx1).
// Throws DegenerateGeometry for points at or behind the eye plane.
Vec2 project_point(const RectifiedRig& rig, Eye eye, const Vec3& point);

// Triangulates corresponding corner detections from a rectified pair.
// Throws RectificationViolation when a pair's rows differ by more than
// row_tolerance pixels.
std::vector<Vec3> triangulate_chessboard(const RectifiedRig& rig, std::span<const Vec2> left,
                                         std::span<const Vec2> right, double row_tolerance = 2.0);

}  // namespace stereoref
