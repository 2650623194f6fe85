#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "scenes.hpp"
#include "stereoref/errors.hpp"
#include "stereoref/rig.hpp"

namespace stereoref {
namespace {

using testing::make_rig;

RectifiedRig random_rig(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f(200, 2000), c(100, 700), tx(1, 10), off(-20, 20);
  const double cx1 = c(rng);
  return make_rig(f(rng), cx1, c(rng), cx1 + off(rng), tx(rng), 640, 480);
}

TEST(Rig, RejectsInvalidParameters) {
  EXPECT_THROW(make_rig(0, 0, 0, 0, 1, 10, 10), InvalidArgument);
  EXPECT_THROW(make_rig(1, 0, 0, 0, -1, 10, 10), InvalidArgument);
  EXPECT_THROW(make_rig(1, 0, 0, 0, 1, 0, 10), InvalidArgument);
  RigParams p{1, 0, 0, 0, 1e-6, 1, 10, 10};
  EXPECT_THROW(RectifiedRig{p}, InvalidArgument);
}

TEST(Rig, ProjectionMatrices) {
  const StereoMatrices unit = build_matrices(make_rig(1, 0, 0, 0, 1, 10, 10));
  EXPECT_EQ(unit.p2.col(3), Vec3(1, 0, 0));
  const StereoMatrices m = build_matrices(make_rig(1000, 320, 240, 320, 5, 640, 480));
  EXPECT_DOUBLE_EQ(m.p2(0, 3), 5000);
  EXPECT_DOUBLE_EQ(m.p1(0, 2), 320);
  EXPECT_DOUBLE_EQ(m.p1(1, 2), 240);
}

TEST(Rig, FromProjectionsRoundTrip) {
  const RectifiedRig rig = make_rig(812.5, 301.25, 244.75, 296.5, 4.25, 640, 480);
  const StereoMatrices m = build_matrices(rig);
  const RectifiedRig back = RectifiedRig::from_projections(m.p1, m.p2, 640, 480);
  EXPECT_DOUBLE_EQ(back.f(), rig.f());
  EXPECT_DOUBLE_EQ(back.cx2(), rig.cx2());
  EXPECT_NEAR(back.tx(), rig.tx(), 1e-15);
  // A negative baseline entry loads as the same rig.
  Mat34 p2 = m.p2;
  p2(0, 3) = -p2(0, 3);
  EXPECT_NEAR(RectifiedRig::from_projections(m.p1, p2, 640, 480).tx(), rig.tx(), 1e-15);
}

TEST(Rig, QPathMatchesTriangulation) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> px(0, 640), d(1, 200);
  for (int i = 0; i < 1000; ++i) {
    const RectifiedRig rig = random_rig(rng);
    const double u = px(rng), v = px(rng);
    double disp = d(rng);
    if (disp + rig.principal_offset() <= 0.5) disp = 0.5 - rig.principal_offset() + d(rng);
    const Vec3 a = triangulate_pixel(rig, u, v, disp);
    const Vec3 b = reproject(build_matrices(rig).q, u, v, disp);
    EXPECT_LE((a - b).norm(), 1e-9 * std::max(1.0, a.norm())) << i;
  }
}

TEST(Rig, DepthDisparityExamples) {
  const RectifiedRig rig = make_rig(1000, 320, 240, 320, 5, 640, 480);
  EXPECT_DOUBLE_EQ(disparity_to_depth(rig, 50), 100);
  EXPECT_DOUBLE_EQ(depth_to_disparity(rig, 100), 50);
  EXPECT_DOUBLE_EQ(depth_to_disparity(rig, 5000), 1);
  // cx1 - cx2 = 10: 5000 / (40 + 10) = 100.
  EXPECT_DOUBLE_EQ(disparity_to_depth(make_rig(1000, 330, 240, 320, 5, 640, 480), 40), 100);
  EXPECT_THROW(disparity_to_depth(rig, 0), DegenerateGeometry);
  EXPECT_THROW(disparity_to_depth(make_rig(1000, 300, 240, 320, 5, 640, 480), 20), DegenerateGeometry);
  EXPECT_THROW(depth_to_disparity(rig, 0), InvalidArgument);
  EXPECT_THROW(depth_to_disparity(rig, -3), InvalidArgument);
}

TEST(Rig, DepthDecreasesWithDisparity) {
  const RectifiedRig rig = make_rig(1000, 320, 240, 320, 5, 640, 480);
  double prev = disparity_to_depth(rig, 0.01);
  for (double d = 0.02; d < 1e5; d *= 1.3) {
    const double z = disparity_to_depth(rig, d);
    EXPECT_LT(z, prev);
    prev = z;
  }
  EXPECT_LT(prev, 1e-1);
}

TEST(Rig, RoundTripProperty) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> logz(0, 4);
  for (int i = 0; i < 10000; ++i) {
    const RectifiedRig rig = random_rig(rng);
    const double z = std::pow(10.0, logz(rng));
    const double d = depth_to_disparity(rig, z);
    if (d + rig.principal_offset() <= 0) continue;
    EXPECT_LE(std::abs(disparity_to_depth(rig, d) - z) / z, 1e-9);
  }
}

TEST(Rig, TriangulatePixel) {
  const RectifiedRig rig = make_rig(1000, 320, 240, 320, 5, 640, 480);
  const Vec3 axis = triangulate_pixel(rig, 320, 240, 50);
  EXPECT_EQ(axis, Vec3(0, 0, 100));
  // Z = 5000/50 = 100, X = (420 - 320) * 100 / 1000 = 10.
  const Vec3 p = triangulate_pixel(rig, 420, 240, 50);
  EXPECT_NEAR(p.x(), 10, 1e-12);
  EXPECT_NEAR(p.y(), 0, 1e-12);
  EXPECT_NEAR(p.z(), 100, 1e-12);
}

TEST(Rig, ProjectInvertsTriangulate) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> px(0, 640), d(1, 150);
  for (int i = 0; i < 1000; ++i) {
    const RectifiedRig rig = random_rig(rng);
    const double u = px(rng), v = px(rng);
    const double disp = std::max(d(rng), 1 - rig.principal_offset());
    const Vec2 uv = project_point(rig, Eye::left, triangulate_pixel(rig, u, v, disp));
    EXPECT_NEAR(uv.x(), u, 1e-9);
    EXPECT_NEAR(uv.y(), v, 1e-9);
  }
}

TEST(Rig, ProjectPointExamples) {
  const RectifiedRig rig = make_rig(1000, 320, 240, 320, 5, 640, 480);
  EXPECT_EQ(project_point(rig, Eye::left, Vec3(0, 0, 70)), Vec2(320, 240));
  // (5, 0, 100): left u = 370, disparity 50, so the right image sees it at 320.
  EXPECT_NEAR(project_point(rig, Eye::left, Vec3(5, 0, 100)).x(), 370, 1e-12);
  EXPECT_NEAR(project_point(rig, Eye::right, Vec3(5, 0, 100)).x(), 320, 1e-12);
  EXPECT_THROW(project_point(rig, Eye::right, Vec3(0, 0, 0)), DegenerateGeometry);
}

TEST(Rig, LeftRightOffsetMatchesDisparity) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> xy(-50, 50), z(20, 400);
  for (int i = 0; i < 1000; ++i) {
    const RectifiedRig rig = random_rig(rng);
    const Vec3 p(xy(rng), xy(rng), z(rng));
    const Vec2 l = project_point(rig, Eye::left, p);
    const Vec2 r = project_point(rig, Eye::right, p);
    EXPECT_NEAR(l.x() - r.x(), depth_to_disparity(rig, p.z()) - (rig.cx2() - rig.cx1()), 1e-9);
    EXPECT_NEAR(l.y(), r.y(), 1e-9);
  }
}

TEST(Rig, ChessboardFromSyntheticGrid) {
  const RectifiedRig rig = make_rig(900, 330, 250, 318, 4.5, 640, 480);
  std::vector<Vec3> grid;
  std::vector<Vec2> left, right;
  for (int j = 0; j < 6; ++j)
    for (int i = 0; i < 8; ++i) {
      // Board tilted about Y, 10 mm squares.
      const Vec3 p(-35.0 + 10 * i, -25.0 + 10 * j, 120.0 + 0.3 * (-35.0 + 10 * i));
      grid.push_back(p);
      left.push_back(project_point(rig, Eye::left, p));
      right.push_back(project_point(rig, Eye::right, p));
    }
  const std::vector<Vec3> rec = triangulate_chessboard(rig, left, right);
  ASSERT_EQ(rec.size(), grid.size());
  for (std::size_t i = 0; i < rec.size(); ++i) EXPECT_LE((rec[i] - grid[i]).norm(), 1e-6);

  const Vec2 pl = project_point(rig, Eye::left, Vec3(0, 0, 90));
  const Vec2 pr = project_point(rig, Eye::right, Vec3(0, 0, 90));
  const Vec3 on_axis = triangulate_chessboard(rig, std::span(&pl, 1), std::span(&pr, 1)).front();
  EXPECT_NEAR(on_axis.x(), 0, 1e-12);
  EXPECT_NEAR(on_axis.y(), 0, 1e-12);
  EXPECT_NEAR(on_axis.z(), 90, 1e-9);
}

TEST(Rig, ChessboardDisparityBiasShiftsDepth) {
  const RectifiedRig rig = make_rig(1000, 320, 240, 320, 5, 640, 480);
  const double z = 100, bias = 0.5;
  std::vector<Vec2> left, right;
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 7; ++i) {
      const Vec3 p(-30.0 + 10 * i, -20.0 + 10 * j, z);
      left.push_back(project_point(rig, Eye::left, p));
      right.push_back(project_point(rig, Eye::right, p) - Vec2(bias, 0));
    }
  const std::vector<Vec3> rec = triangulate_chessboard(rig, left, right);
  // dZ/dd = -Z^2 / (tx f); the second-order term is Z^3 b^2 / (tx f)^2.
  const double first_order = -z * z / (rig.tx() * rig.f()) * bias;
  const double second_order = std::pow(z, 3) * bias * bias / std::pow(rig.tx() * rig.f(), 2);
  for (const Vec3& p : rec) {
    EXPECT_NEAR(p.z() - z, first_order, 1.01 * second_order);
    EXPECT_NEAR(p.z(), rec.front().z(), 1e-9);  // still a fronto-parallel plane
  }
}

TEST(Rig, ChessboardRowMismatch) {
  const RectifiedRig rig = make_rig(1000, 320, 240, 320, 5, 640, 480);
  const std::vector<Vec2> l = {{300, 200}}, r = {{280, 202.5}};
  EXPECT_THROW(triangulate_chessboard(rig, l, r), RectificationViolation);
  const std::vector<Vec2> r_ok = {{280, 201.9}};
  EXPECT_NO_THROW(triangulate_chessboard(rig, l, r_ok));
  EXPECT_THROW(triangulate_chessboard(rig, l, std::vector<Vec2>{}), InvalidArgument);
}

}  // namespace
}  // namespace stereoref
