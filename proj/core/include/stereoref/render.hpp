#pragma once

#include <cstdint>
#include <vector>

#include "stereoref/mesh.hpp"
#include "stereoref/raster.hpp"
#include "stereoref/rig.hpp"
#include "stereoref/se3.hpp"

namespace stereoref {

enum class RenderMode { solid, wireframe, points };

struct RenderConfig {
  double z_near = 1.0;    // mm
  double z_far = 1000.0;  // mm
  RenderMode mode = RenderMode::solid;
  double alpha = 1.0;     // overlay opacity
  // Worker threads for rasterisation; 0 picks the hardware concurrency.
  // Output does not depend on this value.
  int threads = 0;

  // Throws InvalidArgument unless 0 < z_near < z_far and alpha is in [0, 1].
  void validate() const;
};

// Normalised (OpenGL window-space) depth per pixel. Pixels not covered by the
// mesh hold 1, the back plane.
struct DepthBuffer {
  int width = 0;
  int height = 0;
  double z_near = 1.0;
  double z_far = 1000.0;
  std::vector<double> z_gl;

  double at(int x, int y) const { return z_gl[static_cast<std::size_t>(y) * width + x]; }
  bool covered(int x, int y) const { return at(x, y) < 1.0; }
};

// Metric depth of a normalised depth value:
//   Z = -2 n f / (2 (z_gl - 0.5)(f - n) - n - f)
// Throws InvalidArgument when z_gl is outside [0, 1].
double linearize_depth(double z_gl, double z_near, double z_far);

// Inverse of linearize_depth for Z in [z_near, z_far].
double normalize_depth(double z, double z_near, double z_far);

// Perspective z-buffer render of the mesh seen from one eye of the rig with
// the mesh placed by pose (model -> left camera). Pixel (x, y) is sampled at
// image coordinates (x, y), i.e. window position (x + 0.5, y + 0.5). Shared
// edges follow a top-left ownership rule; equal depths within 1e-12 keep the
// lower triangle index.
DepthBuffer rasterize_depth(const TriangleMesh& mesh, const RectifiedRig& rig, Eye eye, const RigidTransform& pose,
                            const RenderConfig& config);

// Renders the mesh in config.mode and alpha-blends it over the background:
//   out = round(bg + alpha * (mesh_color - bg))
// Solid mode interpolates per-vertex color when present, otherwise uses flat
// shading. Throws InvalidArgument when the background size differs from the rig.
ColorImage render_overlay(const TriangleMesh& mesh, const RectifiedRig& rig, Eye eye, const RigidTransform& pose,
                          const RenderConfig& config, const ColorImage& background);

// Color given to vertices that the image does not see.
inline const Vec3 kUnseenColor{1.0, 0.0, 1.0};

// Copies the mesh and colors each vertex with the bilinear sample of the image
// at its projection. Vertices outside the image, behind the eye, or farther
// than visibility_margin mm behind the rendered surface get kUnseenColor.
TriangleMesh project_texture(const ColorImage& image, const RectifiedRig& rig, Eye eye, const RigidTransform& pose,
                             const TriangleMesh& mesh, const RenderConfig& config = {},
                             double visibility_margin = 1.0);

namespace detail {

// Per-pixel winning triangle (-1 for background) alongside the depth buffer.
struct RasterResult {
  DepthBuffer depth;
  std::vector<std::int32_t> triangle;
};

RasterResult rasterize(const TriangleMesh& mesh, const RectifiedRig& rig, Eye eye, const RigidTransform& pose,
                       const RenderConfig& config);

}  // namespace detail

}  // namespace stereoref
