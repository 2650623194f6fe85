#pragma once

#include <array>
#include <cstddef>

#include "stereoref/raster.hpp"
#include "stereoref/render.hpp"

namespace stereoref {

struct ReferenceConfig {
  RenderConfig render;
  double margin = 1.0;  // mm, depth disagreement that marks an occlusion
};

struct ReferenceBundle {
  DepthMap depth_left;
  DepthMap depth_right;
  DisparityMap disparity;  // left to right
  MaskMap mask;
};

// Metric depth from a z-buffer; back-plane pixels become invalid.
DepthMap depth_from_buffer(const DepthBuffer& buffer);

// Per valid pixel d = depth_to_disparity(z); invalid pixels stay invalid.
DisparityMap depthmap_to_disparity(const RectifiedRig& rig, const DepthMap& depth_left);

// Combined occlusion mask in left-image coordinates.
//
// Each valid left pixel looks up the right depth at the nearest pixel to
// u - d + (cx2 - cx1). A partner outside the right image marks non_overlap; a
// depth difference above margin (or an empty partner) marks occluded_left.
// The symmetric pass from the right image marks occluded_right at right-image
// coordinates. Precedence: outside_model > non_overlap > occluded_left >
// occluded_right > valid.
MaskMap compute_occlusions(const RectifiedRig& rig, const DepthMap& depth_left, const DepthMap& depth_right,
                           const DisparityMap& disparity, double margin);

// Renders both eyes and derives disparity and mask.
ReferenceBundle generate_reference(const TriangleMesh& mesh, const RectifiedRig& rig, const RigidTransform& pose,
                                   const ReferenceConfig& config = {});

struct ResampledPair {
  ColorImage resampled;  // right image warped into the left view
  ColorImage diff;       // clamp(gain * |left - resampled|) per channel
};

// Bilinear resampling of the right image at (u - d + (cx2 - cx1), v). Pixels
// with invalid disparity, a sample outside the right image, or a mask label
// of non_overlap/outside_model are zero in both outputs.
ResampledPair resample_and_diff(const RectifiedRig& rig, const ColorImage& right, const ColorImage& left,
                                const DisparityMap& disparity, double gain, const MaskMap* mask = nullptr);

struct RangeStats {
  double min = 0;
  double max = 0;
  double mean = 0;
  double p01 = 0;  // 1st percentile, linear interpolation between ranks
  double p99 = 0;
  std::size_t count = 0;
};

// Statistics over pixels that are valid in the map and labelled valid in the
// mask. Throws InvalidArgument when no pixel qualifies.
RangeStats range_stats(const Raster<double>& map, const MaskMap& mask);

// Pixel count per label, indexed by the label's numeric value.
std::array<std::size_t, kMaskLabelCount> label_counts(const MaskMap& mask);

}  // namespace stereoref
