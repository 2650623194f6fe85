#pragma once

#include <string>
#include <vector>

#include "stereoref/se3.hpp"

namespace stereoref {

// Pose file: the 4x4 homogeneous matrix, one row per line, entries separated
// by whitespace. Written with 17 significant digits so reading returns the
// same doubles.
std::string format_pose(const RigidTransform& pose);
RigidTransform parse_pose(const std::string& text, const std::string& path = "<memory>");
RigidTransform read_pose(const std::string& path);
void write_pose(const std::string& path, const RigidTransform& pose);

// Marker file: three lines `label x y z` with labels left, right and target
// in any order. Blank lines and '#' comments are ignored.
MarkerTriple parse_markers(const std::string& text, const std::string& path = "<memory>");
MarkerTriple read_markers(const std::string& path);

// Parses "x,y,z".
Vec3 parse_vec3(const std::string& text);

}  // namespace stereoref
