#include "studies.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "scenes.hpp"

namespace stereoref::testing {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
}

RectifiedRig study_rig() { return make_rig(250, 160, 128, 160, 20, 320, 256); }

TriangleMesh wavy_scene() { return wavy_surface(100, 20, 4, 4, 90, 200); }

RigidTransform rotate_about_camera(const RigidTransform& pose, const Mat3& d) {
  return {d * pose.rotation(), d * pose.translation()};
}

OutlierStudy outlier_study(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  OutlierStudy s{study_rig(), wavy_scene(), RigidTransform::identity(), {}, 0, {}};
  std::uniform_int_distribution<std::size_t> pick(0, 5);
  s.perturbed = pick(rng);
  for (std::size_t i = 0; i < 6; ++i) {
    const Mat3 d = i == s.perturbed ? axis_angle(random_unit(rng), 5.0 * kDeg) : random_small_rotation(rng, 0.3 * kDeg);
    s.poses.push_back(rotate_about_camera(s.truth, d));
  }
  const DisparityMap truth = render_study(s, s.truth).disparity;
  std::uniform_real_distribution<double> noise(-0.5, 0.5);
  for (int k = 0; k < 2; ++k) {
    DisparityMap p = truth;
    for (double& v : p.pixels())
      if (is_valid(v)) v += noise(rng);
    s.probes.push_back(std::move(p));
  }
  return s;
}

ReferenceBundle render_study(const OutlierStudy& s, const RigidTransform& pose) {
  return generate_reference(s.mesh, s.rig, pose);
}

}  // namespace stereoref::testing
