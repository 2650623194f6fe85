#include "stereoref/mesh.hpp"

#include <string>

#include <Eigen/Geometry>

#include "stereoref/errors.hpp"

namespace stereoref {

double triangle_area(const TriangleMesh& mesh, std::size_t triangle) {
  const auto& t = mesh.triangles[triangle];
  const Vec3& a = mesh.vertices[t[0]];
  return 0.5 * (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).norm();
}

void validate(const TriangleMesh& mesh) {
  if (!mesh.colors.empty() && mesh.colors.size() != mesh.vertices.size())
    throw InvalidArgument("mesh: color count does not match vertex count");
  const auto n = mesh.vertices.size();
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    for (auto idx : mesh.triangles[i])
      if (idx >= n) throw InvalidArgument("mesh: triangle " + std::to_string(i) + " indexes past the vertex list");
    if (triangle_area(mesh, i) < kDegenerateArea)
      throw InvalidArgument("mesh: triangle " + std::to_string(i) + " is degenerate");
  }
}

std::size_t drop_degenerate_triangles(TriangleMesh& mesh) {
  const auto before = mesh.triangles.size();
  std::vector<std::array<std::uint32_t, 3>> kept;
  kept.reserve(before);
  for (std::size_t i = 0; i < before; ++i)
    if (triangle_area(mesh, i) >= kDegenerateArea) kept.push_back(mesh.triangles[i]);
  mesh.triangles = std::move(kept);
  return before - mesh.triangles.size();
}

}  // namespace stereoref
