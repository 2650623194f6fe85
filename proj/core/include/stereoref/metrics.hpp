#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stereoref/raster.hpp"
#include "stereoref/rig.hpp"

namespace stereoref {

enum class DepthErrorKind {
  z_only,     // |Z_est - Z_ref|
  euclidean,  // distance between the triangulated points
};

struct EvalConfig {
  double bad_threshold = 3.0;  // px
  bool include_occluded = false;
  double clip = 10.0;          // px, range of signed error images
  DepthErrorKind depth_error = DepthErrorKind::z_only;

  void validate() const;
};

// Mask labels that enter the evaluation: valid, plus both occlusion labels
// when include_occluded is set.
bool is_eligible(MaskLabel label, const EvalConfig& cfg);

// 100 * |{eligible : |est - ref| > threshold or est invalid}| / |eligible|.
// Throws InvalidArgument when no pixel is eligible.
double bad_pixel_percent(const DisparityMap& est, const DisparityMap& ref, const MaskMap& mask,
                         const EvalConfig& cfg);

// RMS of (est - ref) over eligible pixels with a valid estimate; NaN when every
// eligible estimate is invalid.
double rmse_disparity(const DisparityMap& est, const DisparityMap& ref, const MaskMap& mask, const EvalConfig& cfg);

// RMS depth difference after converting both disparities through the rig.
// Estimates without a finite positive depth are skipped.
double rmse_depth(const RectifiedRig& rig, const DisparityMap& est, const DisparityMap& ref, const MaskMap& mask,
                  const EvalConfig& cfg);

struct VariantScore {
  double bad_percent = 0;
  double rmse_disparity = 0;  // px
  double rmse_depth = 0;      // mm
  std::size_t eligible = 0;
  std::size_t est_invalid = 0;     // eligible pixels without an estimate
  std::size_t depth_excluded = 0;  // estimates that do not triangulate
};

struct ImageScore {
  std::string id;
  VariantScore excluded;  // occlusions not included
  VariantScore included;
};

// Scores one image in both occlusion variants. cfg.include_occluded is ignored.
ImageScore score_image(const std::string& id, const RectifiedRig& rig, const DisparityMap& est,
                       const DisparityMap& ref, const MaskMap& mask, const EvalConfig& cfg = {});

struct Summary {
  double mean = 0;
  double stddev = 0;  // population
};

struct AggregateScore {
  Summary bad_percent;
  Summary rmse_disparity;
  Summary rmse_depth;
};

struct EvalReport {
  std::vector<ImageScore> images;
  AggregateScore excluded;
  AggregateScore included;
};

// Unweighted per-image mean and population standard deviation, in input
// order. Throws InvalidArgument for an empty list.
EvalReport aggregate(std::span<const ImageScore> scores);

// Maps (est - ref) clamped to [-clip, clip] through the signed error colormap.
// Ineligible pixels are kNeutralGray.
ColorImage signed_error_image(const DisparityMap& est, const DisparityMap& ref, const MaskMap& mask,
                              const EvalConfig& cfg);

inline constexpr Rgb8 kNeutralGray{128, 128, 128};

// Diverging colormap on t in [-1, 1]: black at 0, blue then cyan for
// negative errors, red then yellow for positive errors. Knots:
//   t = -1    (0, 255, 255)     t = 1    (255, 255, 0)
//   t = -0.5  (0, 64, 255)      t = 0.5  (255, 64, 0)
//   t =  0    (0, 0, 0)
// Linear interpolation between knots, rounded to the nearest integer.
Rgb8 signed_error_color(double t);

// Flags each candidate reference as an inlier unless its Bad-threshold score
// against every probe exceeds threshold_percent. Probes play the estimate,
// candidates the reference, evaluated over masks[i] with occlusions excluded.
// Throws InvalidArgument without probes or for a threshold outside (0, 100].
std::vector<bool> reject_outlier_alignments(std::span<const DisparityMap> candidates,
                                            std::span<const DisparityMap> probes, std::span<const MaskMap> masks,
                                            double threshold_percent = 20.0, const EvalConfig& cfg = {});

}  // namespace stereoref
