#pragma once

#include <span>
#include <vector>

#include "stereoref/rig.hpp"

namespace stereoref {

// Rigid motion p' = R p + T. Poses map model (CT) coordinates in mm to
// left-camera coordinates (X right, Y down, Z forward).
class RigidTransform {
 public:
  RigidTransform() : r_(Mat3::Identity()), t_(Vec3::Zero()) {}
  // Throws InvalidArgument unless R^T R = I and det R = 1 within 1e-9.
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  // Accepts a 4x4 homogeneous matrix with bottom row [0 0 0 1].
  static RigidTransform from_matrix(const Mat4& m);

  const Mat3& rotation() const { return r_; }
  const Vec3& translation() const { return t_; }
  Mat4 matrix() const;

  Vec3 apply(const Vec3& p) const { return r_ * p + t_; }
  RigidTransform inverse() const;
  // Camera centre expressed in model coordinates, -R^T T.
  Vec3 camera_center() const { return -r_.transpose() * t_; }

 private:
  Mat3 r_;
  Vec3 t_;
};

// a after b: compose(a, b).apply(p) == a.apply(b.apply(p)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
inline RigidTransform invert(const RigidTransform& a) { return a.inverse(); }
inline Vec3 apply(const RigidTransform& a, const Vec3& p) { return a.apply(p); }

// Angle of R_a^T R_b, radians.
double geodesic_distance(const Mat3& a, const Mat3& b);

// Rx(rx) * Ry(ry) * Rz(rz): rotate about X, then about the rotated Y, then
// about the twice-rotated Z.
Mat3 rotation_from_euler_xyz(double rx, double ry, double rz);

struct RotationMean {
  Mat3 rotation;
  // Set when the two largest eigenvalues of the quaternion scatter matrix
  // coincide, so the mean is not unique.
  bool ambiguous = false;
};

// Quaternion eigen-analysis mean: the rotation of the dominant eigenvector of
// sum(q q^T). Invariant to quaternion sign. Throws InvalidArgument on empty input.
RotationMean average_rotations(std::span<const Mat3> rotations);

struct AlignmentSet {
  std::vector<RigidTransform> transforms;
  // Centre of rotation in model coordinates.
  Vec3 center = Vec3::Zero();
  // Per-transform inlier flag; empty means every transform is an inlier.
  std::vector<bool> inliers;
};

// Mean of the inlier transforms about set.center:
//   R = average_rotations(R_i), y = mean(R_i c + T_i), T = y - R c.
// Throws InvalidArgument when there are no inliers.
RigidTransform average_transforms(const AlignmentSet& set);

struct Registration {
  RigidTransform transform;
  double scale = 1.0;
  double fre_rms = 0.0;  // mm
};

// Least-squares fit of dst ~ s R src + T (s = 1 unless with_scale). Throws
// DegenerateGeometry for fewer than three or collinear correspondences.
Registration register_points(std::span<const Vec3> src, std::span<const Vec3> dst, bool with_scale);

struct MarkerTriple {
  Vec3 left_cam;
  Vec3 right_cam;
  Vec3 target;
};

// Camera at left_cam looking at target, X towards right_cam. Throws
// DegenerateGeometry for coincident or collinear markers.
RigidTransform initial_pose_from_markers(const MarkerTriple& m);

struct PoseDelta {
  double rx = 0;
  double ry = 0;
  double rz = 0;
  double dz = 0;  // mm along the camera's viewing axis
};

inline constexpr double kDefaultDzBound = 20.0;

// Rotates the camera about its own centre by rotation_from_euler_xyz(rx, ry,
// rz), then moves it dz mm along its new Z axis. The camera centre in model
// coordinates only ever moves along the viewing axis. Throws BoundViolation
// when |dz| > dz_bound.
RigidTransform constrained_adjust(const RigidTransform& pose, const PoseDelta& delta,
                                  double dz_bound = kDefaultDzBound);

}  // namespace stereoref
