#include "stereoref/pose_io.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "stereoref/errors.hpp"
#include "stereoref/png_io.hpp"

namespace stereoref {

namespace {

std::string load_text(const std::string& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

std::string strip_comment(std::string line) {
  if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
  return line;
}

}  // namespace

std::string format_pose(const RigidTransform& pose) {
  const Mat4 m = pose.matrix();
  std::string out;
  char buf[40];
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      // Normalise -0 so equal poses print identically.
      const double v = m(r, c) == 0.0 ? 0.0 : m(r, c);
      std::snprintf(buf, sizeof buf, "%.17g", v);
      if (c > 0) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

RigidTransform parse_pose(const std::string& text, const std::string& path) {
  std::istringstream in(text);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_comment(line);
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw FileError(FileError::Kind::malformed, path, "not a number: " + tok);
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.size() != 4) throw FileError(FileError::Kind::malformed, path, "pose must have 4 rows");
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    if (rows[r].size() != 4) throw FileError(FileError::Kind::malformed, path, "pose rows must have 4 entries");
    for (int c = 0; c < 4; ++c) m(r, c) = rows[r][c];
  }
  try {
    return RigidTransform::from_matrix(m);
  } catch (const InvalidArgument& e) {
    throw FileError(FileError::Kind::malformed, path, e.what());
  }
}

RigidTransform read_pose(const std::string& path) { return parse_pose(load_text(path), path); }

void write_pose(const std::string& path, const RigidTransform& pose) {
  const std::string text = format_pose(pose);
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

MarkerTriple parse_markers(const std::string& text, const std::string& path) {
  std::istringstream in(text);
  std::map<std::string, Vec3> points;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_comment(line);
    std::istringstream ls(line);
    std::string label;
    if (!(ls >> label)) continue;
    Vec3 p;
    std::string extra;
    if (!(ls >> p.x() >> p.y() >> p.z()) || (ls >> extra))
      throw FileError(FileError::Kind::malformed, path, "expected `label x y z`, got: " + line);
    if (label != "left" && label != "right" && label != "target")
      throw FileError(FileError::Kind::malformed, path, "unknown marker label " + label);
    if (!p.allFinite()) throw FileError(FileError::Kind::malformed, path, "marker " + label + " is not finite");
    if (!points.emplace(label, p).second) throw FileError(FileError::Kind::malformed, path, "duplicate marker " + label);
  }
  if (points.size() != 3) throw FileError(FileError::Kind::malformed, path, "need markers left, right and target");
  return {points["left"], points["right"], points["target"]};
}

MarkerTriple read_markers(const std::string& path) { return parse_markers(load_text(path), path); }

Vec3 parse_vec3(const std::string& text) {
  Vec3 v;
  std::istringstream in(text);
  char c1 = 0, c2 = 0;
  std::string rest;
  if (!(in >> v.x() >> c1 >> v.y() >> c2 >> v.z()) || c1 != ',' || c2 != ',' || (in >> rest) || !v.allFinite())
    throw InvalidArgument("expected x,y,z but got '" + text + "'");
  return v;
}

}  // namespace stereoref
