#include "stereoref/se3.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "stereoref/errors.hpp"

namespace stereoref {

namespace {

bool is_rotation(const Mat3& r, double tol) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

}  // namespace

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation) : r_(rotation), t_(translation) {
  if (!r_.allFinite() || !t_.allFinite()) throw InvalidArgument("rigid transform has non-finite entries");
  if (!is_rotation(r_, 1e-9)) throw InvalidArgument("rigid transform rotation is not orthonormal with det +1");
}

RigidTransform RigidTransform::from_matrix(const Mat4& m) {
  if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-12)
    throw InvalidArgument("homogeneous matrix bottom row must be [0 0 0 1]");
  return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

Mat4 RigidTransform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = r_;
  m.topRightCorner<3, 1>() = t_;
  return m;
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = r_.transpose();
  return {rt, -rt * t_};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

double geodesic_distance(const Mat3& a, const Mat3& b) {
  // atan2 form stays accurate near 0 and pi, unlike acos of the trace.
  const Mat3 d = a.transpose() * b;
  const double c = (d.trace() - 1.0) / 2.0;
  const Vec3 axis(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  const double s = axis.norm() / 2.0;
  return std::atan2(s, c);
}

Mat3 rotation_from_euler_xyz(double rx, double ry, double rz) {
  return (Eigen::AngleAxisd(rx, Vec3::UnitX()) * Eigen::AngleAxisd(ry, Vec3::UnitY()) *
          Eigen::AngleAxisd(rz, Vec3::UnitZ()))
      .toRotationMatrix();
}

RotationMean average_rotations(std::span<const Mat3> rotations) {
  if (rotations.empty()) throw InvalidArgument("average_rotations: empty input");
  Eigen::Matrix4d scatter = Eigen::Matrix4d::Zero();
  for (const Mat3& r : rotations) {
    if (!is_rotation(r, 1e-9)) throw InvalidArgument("average_rotations: input is not a rotation");
    const Eigen::Quaterniond q(r);
    const Eigen::Vector4d v(q.w(), q.x(), q.y(), q.z());
    scatter += v * v.transpose();
  }
  // Eigenvalues come back in increasing order.
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(scatter);
  const Eigen::Vector4d ev = eig.eigenvalues();
  const Eigen::Vector4d best = eig.eigenvectors().col(3);
  RotationMean out;
  out.rotation = Eigen::Quaterniond(best(0), best(1), best(2), best(3)).normalized().toRotationMatrix();
  out.ambiguous = (ev(3) - ev(2)) <= 1e-9 * std::max(ev(3), 1.0);
  return out;
}

RigidTransform average_transforms(const AlignmentSet& set) {
  if (!set.inliers.empty() && set.inliers.size() != set.transforms.size())
    throw InvalidArgument("average_transforms: inlier flags do not match transforms");
  if (!set.center.allFinite()) throw InvalidArgument("average_transforms: centre of rotation is not finite");

  std::vector<Mat3> rotations;
  Vec3 y_sum = Vec3::Zero();
  for (std::size_t i = 0; i < set.transforms.size(); ++i) {
    if (!set.inliers.empty() && !set.inliers[i]) continue;
    rotations.push_back(set.transforms[i].rotation());
    y_sum += set.transforms[i].apply(set.center);
  }
  if (rotations.empty()) throw InvalidArgument("average_transforms: no inlier transforms");
  // Identical inputs (including a single inlier) average to themselves exactly.
  const RigidTransform* first = nullptr;
  bool all_equal = true;
  for (std::size_t i = 0; i < set.transforms.size() && all_equal; ++i) {
    if (!set.inliers.empty() && !set.inliers[i]) continue;
    const RigidTransform& t = set.transforms[i];
    if (first == nullptr)
      first = &t;
    else
      all_equal = t.rotation() == first->rotation() && t.translation() == first->translation();
  }
  if (all_equal) return *first;

  const Mat3 r_mean = average_rotations(rotations).rotation;
  const Vec3 y_mean = y_sum / static_cast<double>(rotations.size());
  return {r_mean, y_mean - r_mean * set.center};
}

Registration register_points(std::span<const Vec3> src, std::span<const Vec3> dst, bool with_scale) {
  if (src.size() != dst.size()) throw InvalidArgument("register_points: point lists differ in length");
  const std::size_t n = src.size();
  if (n < 3) throw DegenerateGeometry("register_points: need at least three correspondences");

  Vec3 mean_src = Vec3::Zero();
  Vec3 mean_dst = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mean_src += src[i];
    mean_dst += dst[i];
  }
  mean_src /= static_cast<double>(n);
  mean_dst /= static_cast<double>(n);

  Mat3 cross = Mat3::Zero();
  Mat3 src_scatter = Mat3::Zero();
  double src_var = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 a = src[i] - mean_src;
    const Vec3 b = dst[i] - mean_dst;
    cross += b * a.transpose();
    src_scatter += a * a.transpose();
    src_var += a.squaredNorm();
  }

  const Eigen::SelfAdjointEigenSolver<Mat3> spread(src_scatter);
  const double largest = spread.eigenvalues()(2);
  if (!(largest > 0) || spread.eigenvalues()(1) <= 1e-12 * largest)
    throw DegenerateGeometry("register_points: source points are collinear");

  const Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1;
  const Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();
  const double s = with_scale ? (svd.singularValues().asDiagonal() * d).trace() / src_var : 1.0;
  const Vec3 t = mean_dst - s * r * mean_src;

  double sq = 0;
  for (std::size_t i = 0; i < n; ++i) sq += (dst[i] - (s * r * src[i] + t)).squaredNorm();

  return {RigidTransform(r, t), s, std::sqrt(sq / static_cast<double>(n))};
}

RigidTransform initial_pose_from_markers(const MarkerTriple& m) {
  const Vec3 baseline = m.right_cam - m.left_cam;
  const Vec3 view = m.target - m.left_cam;
  if (baseline.norm() < 1e-12) throw DegenerateGeometry("markers: left and right camera coincide");
  if (view.norm() < 1e-12) throw DegenerateGeometry("markers: target coincides with the left camera");
  const Vec3 z = view.normalized();
  const double angle = std::atan2(baseline.cross(z).norm(), baseline.dot(z));
  if (angle < 1e-6 || angle > M_PI - 1e-6)
    throw DegenerateGeometry("markers: target is collinear with the camera pair");
  const Vec3 x = (baseline - baseline.dot(z) * z).normalized();
  const Vec3 y = z.cross(x);

  // Columns are the camera axes in model coordinates; the model-to-camera
  // rotation is its transpose.
  Mat3 axes;
  axes.col(0) = x;
  axes.col(1) = y;
  axes.col(2) = z;
  const Mat3 r = axes.transpose();
  return {r, -r * m.left_cam};
}

RigidTransform constrained_adjust(const RigidTransform& pose, const PoseDelta& delta, double dz_bound) {
  if (!std::isfinite(delta.rx) || !std::isfinite(delta.ry) || !std::isfinite(delta.rz) || !std::isfinite(delta.dz))
    throw InvalidArgument("pose delta must be finite");
  if (std::abs(delta.dz) > dz_bound) {
    throw BoundViolation("axial translation " + std::to_string(delta.dz) + " mm exceeds the bound of " +
                         std::to_string(dz_bound) + " mm");
  }
  // Camera-frame coordinates after the camera turns by A are A^T p.
  const Mat3 a_t = rotation_from_euler_xyz(delta.rx, delta.ry, delta.rz).transpose();
  Vec3 t = a_t * pose.translation();
  t.z() -= delta.dz;
  return {a_t * pose.rotation(), t};
}

}  // namespace stereoref
