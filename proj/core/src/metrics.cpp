#include "stereoref/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "stereoref/errors.hpp"

namespace stereoref {

namespace {

void require_shapes(const DisparityMap& est, const DisparityMap& ref, const MaskMap& mask) {
  if (!est.same_shape(ref) || !est.same_shape(mask)) throw InvalidArgument("metrics: map dimensions differ");
}

// Pixel is scored: eligible label and a defined reference.
bool scored(MaskLabel label, double ref, const EvalConfig& cfg) { return is_eligible(label, cfg) && is_valid(ref); }

double depth_of(const RectifiedRig& rig, double d) {
  const double denom = d + rig.principal_offset();
  return denom > 0 ? rig.tx() * rig.f() / denom : kInvalid;
}

struct Accumulated {
  std::size_t eligible = 0;
  std::size_t bad = 0;
  std::size_t est_invalid = 0;
  std::size_t depth_excluded = 0;
  double disp_sq = 0;
  std::size_t disp_n = 0;
  double depth_sq = 0;
  std::size_t depth_n = 0;
};

Accumulated accumulate(const RectifiedRig* rig, const DisparityMap& est, const DisparityMap& ref,
                       const MaskMap& mask, const EvalConfig& cfg) {
  require_shapes(est, ref, mask);
  Accumulated a;
  for (int y = 0; y < ref.height(); ++y) {
    for (int x = 0; x < ref.width(); ++x) {
      const double r = ref(x, y);
      if (!scored(mask(x, y), r, cfg)) continue;
      ++a.eligible;
      const double e = est(x, y);
      if (!is_valid(e)) {
        ++a.bad;
        ++a.est_invalid;
        continue;
      }
      const double err = e - r;
      if (std::abs(err) > cfg.bad_threshold) ++a.bad;
      a.disp_sq += err * err;
      ++a.disp_n;
      if (rig == nullptr) continue;
      const double ze = depth_of(*rig, e);
      const double zr = depth_of(*rig, r);
      if (!is_valid(ze) || !is_valid(zr)) {
        ++a.depth_excluded;
        continue;
      }
      double dz;
      if (cfg.depth_error == DepthErrorKind::z_only) {
        dz = ze - zr;
      } else {
        dz = (triangulate_pixel(*rig, x, y, e) - triangulate_pixel(*rig, x, y, r)).norm();
      }
      a.depth_sq += dz * dz;
      ++a.depth_n;
    }
  }
  return a;
}

double rms(double sq, std::size_t n) { return n == 0 ? kInvalid : std::sqrt(sq / static_cast<double>(n)); }

Summary summarize(const std::vector<double>& v) {
  Summary s;
  double sum = 0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double var = 0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(v.size()));
  return s;
}

VariantScore to_variant(const Accumulated& a) {
  VariantScore v;
  v.eligible = a.eligible;
  v.est_invalid = a.est_invalid;
  v.depth_excluded = a.depth_excluded;
  v.bad_percent = a.eligible == 0 ? kInvalid : 100.0 * static_cast<double>(a.bad) / static_cast<double>(a.eligible);
  v.rmse_disparity = rms(a.disp_sq, a.disp_n);
  v.rmse_depth = rms(a.depth_sq, a.depth_n);
  return v;
}

}  // namespace

void EvalConfig::validate() const {
  if (!(bad_threshold > 0)) throw InvalidArgument("eval config: bad threshold must be positive");
  if (!(clip > 0)) throw InvalidArgument("eval config: clip must be positive");
}

bool is_eligible(MaskLabel label, const EvalConfig& cfg) {
  return label == MaskLabel::valid || (cfg.include_occluded && is_occluded(label));
}

double bad_pixel_percent(const DisparityMap& est, const DisparityMap& ref, const MaskMap& mask,
                         const EvalConfig& cfg) {
  cfg.validate();
  const Accumulated a = accumulate(nullptr, est, ref, mask, cfg);
  if (a.eligible == 0) throw InvalidArgument("bad_pixel_percent: no eligible pixels");
  return 100.0 * static_cast<double>(a.bad) / static_cast<double>(a.eligible);
}

double rmse_disparity(const DisparityMap& est, const DisparityMap& ref, const MaskMap& mask, const EvalConfig& cfg) {
  cfg.validate();
  const Accumulated a = accumulate(nullptr, est, ref, mask, cfg);
  if (a.eligible == 0) throw InvalidArgument("rmse_disparity: no eligible pixels");
  return rms(a.disp_sq, a.disp_n);
}

double rmse_depth(const RectifiedRig& rig, const DisparityMap& est, const DisparityMap& ref, const MaskMap& mask,
                  const EvalConfig& cfg) {
  cfg.validate();
  const Accumulated a = accumulate(&rig, est, ref, mask, cfg);
  if (a.eligible == 0) throw InvalidArgument("rmse_depth: no eligible pixels");
  return rms(a.depth_sq, a.depth_n);
}

ImageScore score_image(const std::string& id, const RectifiedRig& rig, const DisparityMap& est,
                       const DisparityMap& ref, const MaskMap& mask, const EvalConfig& cfg) {
  cfg.validate();
  EvalConfig excl = cfg;
  excl.include_occluded = false;
  EvalConfig incl = cfg;
  incl.include_occluded = true;
  ImageScore s;
  s.id = id;
  s.excluded = to_variant(accumulate(&rig, est, ref, mask, excl));
  s.included = to_variant(accumulate(&rig, est, ref, mask, incl));
  if (s.included.eligible == 0) throw InvalidArgument("score_image: image " + id + " has no eligible pixels");
  return s;
}

EvalReport aggregate(std::span<const ImageScore> scores) {
  if (scores.empty()) throw InvalidArgument("aggregate: no image scores");
  EvalReport r;
  r.images.assign(scores.begin(), scores.end());
  auto collect = [&](auto variant, auto field) {
    std::vector<double> v;
    v.reserve(scores.size());
    for (const ImageScore& s : scores) v.push_back(s.*variant.*field);
    return summarize(v);
  };
  for (auto [variant, out] : {std::pair{&ImageScore::excluded, &r.excluded}, std::pair{&ImageScore::included, &r.included}}) {
    out->bad_percent = collect(variant, &VariantScore::bad_percent);
    out->rmse_disparity = collect(variant, &VariantScore::rmse_disparity);
    out->rmse_depth = collect(variant, &VariantScore::rmse_depth);
  }
  return r;
}

Rgb8 signed_error_color(double t) {
  struct Knot {
    double t;
    double r, g, b;
  };
  static constexpr Knot kKnots[] = {
      {-1.0, 0, 255, 255}, {-0.5, 0, 64, 255}, {0.0, 0, 0, 0}, {0.5, 255, 64, 0}, {1.0, 255, 255, 0},
  };
  t = std::clamp(t, -1.0, 1.0);
  std::size_t k = 0;
  while (k + 2 < std::size(kKnots) && t > kKnots[k + 1].t) ++k;
  const Knot& a = kKnots[k];
  const Knot& b = kKnots[k + 1];
  const double s = (t - a.t) / (b.t - a.t);
  auto mix = [s](double p, double q) { return static_cast<std::uint8_t>(std::lround(p + s * (q - p))); };
  return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

ColorImage signed_error_image(const DisparityMap& est, const DisparityMap& ref, const MaskMap& mask,
                              const EvalConfig& cfg) {
  cfg.validate();
  require_shapes(est, ref, mask);
  ColorImage out(ref.width(), ref.height(), kNeutralGray);
  for (int y = 0; y < ref.height(); ++y) {
    for (int x = 0; x < ref.width(); ++x) {
      const double e = est(x, y);
      const double r = ref(x, y);
      if (!scored(mask(x, y), r, cfg) || !is_valid(e)) continue;
      out(x, y) = signed_error_color((e - r) / cfg.clip);
    }
  }
  return out;
}

std::vector<bool> reject_outlier_alignments(std::span<const DisparityMap> candidates,
                                            std::span<const DisparityMap> probes, std::span<const MaskMap> masks,
                                            double threshold_percent, const EvalConfig& cfg) {
  if (probes.empty()) throw InvalidArgument("reject_outlier_alignments: no probe disparity maps");
  if (!(threshold_percent > 0 && threshold_percent <= 100))
    throw InvalidArgument("reject_outlier_alignments: threshold must be in (0, 100]");
  if (masks.size() != candidates.size())
    throw InvalidArgument("reject_outlier_alignments: one mask per candidate required");
  EvalConfig excl = cfg;
  excl.include_occluded = false;
  std::vector<bool> inlier(candidates.size(), true);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    bool bad_for_all = true;
    for (const DisparityMap& probe : probes) {
      if (bad_pixel_percent(probe, candidates[i], masks[i], excl) <= threshold_percent) {
        bad_for_all = false;
        break;
      }
    }
    inlier[i] = !bad_for_all;
  }
  return inlier;
}

}  // namespace stereoref
