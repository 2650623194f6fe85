#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <string>

#include "stereoref/mesh.hpp"
#include "stereoref/rig.hpp"
#include "stereoref/se3.hpp"

namespace stereoref::testing {

RectifiedRig make_rig(double f, double cx1, double cy, double cx2, double tx, int width, int height);

// f=500, tx=5, principal point (320, 256), 640x512.
RectifiedRig plane_rig();

// Axis-aligned rectangle [x0,x1] x [y0,y1] at depth z, split into nx*ny
// quads. Normals face the camera (-Z).
TriangleMesh rectangle(double x0, double x1, double y0, double y1, double z, int nx = 1, int ny = 1);

// Appends b to a.
void append(TriangleMesh& a, const TriangleMesh& b);

// Background plane at z_bg filling any view of the rig plus a vertical strip
// covering x in [strip_x0, strip_x1] at z_fg.
TriangleMesh strip_scene(double z_bg, double z_fg, double strip_x0, double strip_x1);

// Icosahedron subdivided `levels` times with vertices on the sphere.
TriangleMesh icosphere(const Vec3& center, double radius, int levels);

// Height field z = base + amplitude * sin(x / wx) * cos(y / wy) sampled on an
// n x n grid over [-half, half]^2.
TriangleMesh wavy_surface(double base, double amplitude, double wx, double wy, double half, int n);

// Ray-cast oracle. Rays start at the eye centre ((0,0,0) for the left eye,
// (tx,0,0) for the right) through pixel (x, y) using the rig's pinhole model
// written out independently of project_point. Returns the camera-frame point
// of the nearest hit in front of the eye.
std::optional<Vec3> ray_cast(const TriangleMesh& mesh, const RigidTransform& pose, const RectifiedRig& rig, Eye eye,
                             double x, double y);

// Nearest hit distance along an arbitrary ray in camera coordinates.
std::optional<double> ray_hit(const TriangleMesh& camera_mesh, const Vec3& origin, const Vec3& dir);

// Mesh vertices mapped into camera coordinates.
TriangleMesh transformed(const TriangleMesh& mesh, const RigidTransform& pose);

Mat3 random_rotation(std::mt19937_64& rng);
// Rotation by an angle drawn uniformly from [0, max_angle] about a uniformly
// random axis.
Mat3 random_small_rotation(std::mt19937_64& rng, double max_angle);
Mat3 axis_angle(const Vec3& axis, double angle);
Vec3 random_unit(std::mt19937_64& rng);

// Fresh empty directory under the system temp dir, removed by the destructor.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& child = "") const;

 private:
  std::filesystem::path path_;
};

// Writes a calibration.json holding one entry for the rig.
void write_calibration(const std::string& path, const RectifiedRig& rig, const std::string& id = "001");

}  // namespace stereoref::testing
