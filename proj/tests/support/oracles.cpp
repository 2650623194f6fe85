#include "oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "scenes.hpp"

namespace stereoref::testing {

namespace {

// Rotation angle written out from the matrix, without the library helpers.
double angle_between(const Mat3& a, const Mat3& b) {
  const Mat3 d = a.transpose() * b;
  const double s = 0.5 * Vec3(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)).norm();
  const double c = 0.5 * (d.trace() - 1.0);
  return std::atan2(s, c);
}

}  // namespace

Mat3 exp_so3(const Vec3& w) {
  const double theta = w.norm();
  Mat3 k;
  k << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  if (theta < 1e-12) return Mat3::Identity() + k;
  return Mat3::Identity() + std::sin(theta) / theta * k + (1 - std::cos(theta)) / (theta * theta) * k * k;
}

Vec3 nelder_mead(const std::function<double(const Vec3&)>& f, const Vec3& start, double step, double tol,
                 int max_iter) {
  std::array<Vec3, 4> x;
  std::array<double, 4> fx;
  x[0] = start;
  for (int i = 0; i < 3; ++i) {
    x[i + 1] = start;
    x[i + 1][i] += step;
  }
  for (int i = 0; i < 4; ++i) fx[i] = f(x[i]);
  for (int iter = 0; iter < max_iter; ++iter) {
    std::array<int, 4> order = {0, 1, 2, 3};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    std::array<Vec3, 4> xs;
    std::array<double, 4> fs;
    for (int i = 0; i < 4; ++i) {
      xs[i] = x[order[i]];
      fs[i] = fx[order[i]];
    }
    x = xs;
    fx = fs;
    double spread = 0;
    for (int i = 1; i < 4; ++i) spread = std::max(spread, (x[i] - x[0]).norm());
    if (spread < tol && fx[3] - fx[0] <= tol * tol) break;

    const Vec3 centroid = (x[0] + x[1] + x[2]) / 3.0;
    const Vec3 xr = centroid + (centroid - x[3]);
    const double fr = f(xr);
    if (fr < fx[0]) {
      const Vec3 xe = centroid + 2.0 * (centroid - x[3]);
      const double fe = f(xe);
      if (fe < fr) {
        x[3] = xe;
        fx[3] = fe;
      } else {
        x[3] = xr;
        fx[3] = fr;
      }
    } else if (fr < fx[2]) {
      x[3] = xr;
      fx[3] = fr;
    } else {
      const bool outside = fr < fx[3];
      const Vec3 xc = outside ? centroid + 0.5 * (xr - centroid) : centroid + 0.5 * (x[3] - centroid);
      const double fc = f(xc);
      if (fc < std::min(fr, fx[3])) {
        x[3] = xc;
        fx[3] = fc;
      } else {
        for (int i = 1; i < 4; ++i) {
          x[i] = x[0] + 0.5 * (x[i] - x[0]);
          fx[i] = f(x[i]);
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (fx[i] < fx[best]) best = i;
  return x[best];
}

Mat3 brute_force_rotation_mean(std::span<const Mat3> rotations, RotationCost cost) {
  Mat3 base = rotations.front();
  for (int round = 0; round < 50; ++round) {
    auto objective = [&](const Vec3& w) {
      const Mat3 r = base * exp_so3(w);
      double sum = 0;
      for (const Mat3& ri : rotations) {
        const double a = angle_between(r, ri);
        sum += cost == RotationCost::geodesic ? a * a : std::pow(std::sin(a / 2), 2);
      }
      return sum;
    };
    const Vec3 w = nelder_mead(objective, Vec3::Zero(), round == 0 ? 0.1 : 1e-3, 1e-12);
    base = base * exp_so3(w);
    // Re-orthonormalise against accumulated rounding.
    const Eigen::JacobiSVD<Mat3> svd(base, Eigen::ComputeFullU | Eigen::ComputeFullV);
    base = svd.matrixU() * svd.matrixV().transpose();
    if (w.norm() < 1e-12) break;
  }
  return base;
}

double set_diameter(std::span<const Mat3> rotations) {
  double d = 0;
  for (std::size_t i = 0; i < rotations.size(); ++i)
    for (std::size_t j = i + 1; j < rotations.size(); ++j) d = std::max(d, angle_between(rotations[i], rotations[j]));
  return d;
}

std::vector<Mat3> dispersed_rotation_set(std::mt19937_64& rng, std::size_t n, double max_dispersion_deg) {
  const double limit = max_dispersion_deg * std::numbers::pi / 180.0;
  for (;;) {
    const Mat3 center = random_rotation(rng);
    std::vector<Mat3> set;
    for (std::size_t i = 0; i < n; ++i) set.push_back(center * random_small_rotation(rng, limit));
    if (set_diameter(set) < limit) return set;
  }
}

}  // namespace stereoref::testing
