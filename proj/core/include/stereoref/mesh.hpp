#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "stereoref/rig.hpp"

namespace stereoref {

// Triangle surface in model coordinates (mm). colors is either empty or holds
// one RGB triple in [0, 1] per vertex.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<Vec3> colors;

  bool has_colors() const { return !colors.empty(); }
  bool empty() const { return triangles.empty(); }
};

inline constexpr double kDegenerateArea = 1e-12;  // mm^2

// Throws InvalidArgument for out-of-range indices, a color count that does not
// match the vertex count, or triangles with area below kDegenerateArea.
void validate(const TriangleMesh& mesh);

// Removes zero-area triangles and returns how many were dropped.
std::size_t drop_degenerate_triangles(TriangleMesh& mesh);

double triangle_area(const TriangleMesh& mesh, std::size_t triangle);

// Readers accept ASCII and binary (little- or big-endian) PLY with float or
// double vertex coordinates, optional red/green/blue vertex properties (uchar
// 0-255 or float 0-1), and a "vertex_indices"/"vertex_index" face list.
// Polygons with more than three vertices are fan-triangulated. STL (ASCII or
// binary) loads without color; coincident STL vertices are merged. Degenerate
// triangles are dropped on load.
TriangleMesh read_ply(const std::filesystem::path& path);
TriangleMesh read_stl(const std::filesystem::path& path);
// Dispatches on the file extension (.ply or .stl, case-insensitive).
TriangleMesh read_mesh(const std::filesystem::path& path);

// Writes binary little-endian PLY when binary is set, ASCII otherwise. Colors
// are written as uchar red/green/blue.
void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh, bool binary = true);

}  // namespace stereoref
