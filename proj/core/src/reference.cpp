#include "stereoref/reference.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "stereoref/errors.hpp"

namespace stereoref {

namespace {

// Nearest pixel column to a continuous image coordinate.
int nearest_column(double u) { return static_cast<int>(std::floor(u + 0.5)); }

void require_same_shape(const Raster<double>& a, const Raster<double>& b, const char* what) {
  if (!a.same_shape(b)) throw InvalidArgument(std::string(what) + ": map dimensions differ");
}

}  // namespace

DepthMap depth_from_buffer(const DepthBuffer& buffer) {
  DepthMap out(buffer.width, buffer.height);
  for (int y = 0; y < buffer.height; ++y)
    for (int x = 0; x < buffer.width; ++x)
      if (buffer.covered(x, y)) out(x, y) = linearize_depth(buffer.at(x, y), buffer.z_near, buffer.z_far);
  return out;
}

DisparityMap depthmap_to_disparity(const RectifiedRig& rig, const DepthMap& depth_left) {
  DisparityMap out(depth_left.width(), depth_left.height());
  auto src = depth_left.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i)
    if (is_valid(src[i])) dst[i] = depth_to_disparity(rig, src[i]);
  return out;
}

MaskMap compute_occlusions(const RectifiedRig& rig, const DepthMap& depth_left, const DepthMap& depth_right,
                           const DisparityMap& disparity, double margin) {
  require_same_shape(depth_left, depth_right, "compute_occlusions");
  require_same_shape(depth_left, disparity, "compute_occlusions");
  if (!(margin > 0)) throw InvalidArgument("compute_occlusions: margin must be positive");

  const int w = depth_left.width();
  const int h = depth_left.height();
  const double offset = rig.cx2() - rig.cx1();
  MaskMap mask(w, h, MaskLabel::valid);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double zl = depth_left(x, y);
      const double d = disparity(x, y);
      if (!is_valid(zl) || !is_valid(d)) {
        mask(x, y) = MaskLabel::outside_model;
        continue;
      }
      const int xr = nearest_column(x - d + offset);
      if (xr < 0 || xr >= w) {
        mask(x, y) = MaskLabel::non_overlap;
        continue;
      }
      const double zr = depth_right(xr, y);
      if (!is_valid(zr) || std::abs(zl - zr) > margin) mask(x, y) = MaskLabel::occluded_left;
    }
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double zr = depth_right(x, y);
      if (!is_valid(zr) || mask(x, y) != MaskLabel::valid) continue;
      const int xl = nearest_column(x + depth_to_disparity(rig, zr) - offset);
      if (xl < 0 || xl >= w) continue;
      const double zl = depth_left(xl, y);
      if (!is_valid(zl) || std::abs(zl - zr) > margin) mask(x, y) = MaskLabel::occluded_right;
    }
  }
  return mask;
}

ReferenceBundle generate_reference(const TriangleMesh& mesh, const RectifiedRig& rig, const RigidTransform& pose,
                                   const ReferenceConfig& config) {
  config.render.validate();
  ReferenceBundle out;
  out.depth_left = depth_from_buffer(rasterize_depth(mesh, rig, Eye::left, pose, config.render));
  out.depth_right = depth_from_buffer(rasterize_depth(mesh, rig, Eye::right, pose, config.render));
  out.disparity = depthmap_to_disparity(rig, out.depth_left);
  out.mask = compute_occlusions(rig, out.depth_left, out.depth_right, out.disparity, config.margin);
  return out;
}

ResampledPair resample_and_diff(const RectifiedRig& rig, const ColorImage& right, const ColorImage& left,
                                const DisparityMap& disparity, double gain, const MaskMap* mask) {
  if (!right.same_shape(left) || !right.same_shape(disparity) || (mask && !mask->same_shape(right)))
    throw InvalidArgument("resample_and_diff: image dimensions differ");
  const int w = right.width();
  const int h = right.height();
  const double offset = rig.cx2() - rig.cx1();
  ResampledPair out{ColorImage(w, h), ColorImage(w, h)};

  auto lerp_channel = [](double a, double b, double t) { return a + t * (b - a); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = disparity(x, y);
      if (!is_valid(d)) continue;
      if (mask) {
        const MaskLabel l = (*mask)(x, y);
        if (l == MaskLabel::non_overlap || l == MaskLabel::outside_model) continue;
      }
      const double u = x - d + offset;
      if (!(u >= 0 && u <= w - 1)) continue;
      const int x0 = static_cast<int>(std::floor(u));
      const int x1 = std::min(x0 + 1, w - 1);
      const double t = u - x0;
      const Rgb8 a = right(x0, y);
      const Rgb8 b = right(x1, y);
      auto sample = [&](std::uint8_t ca, std::uint8_t cb) {
        return static_cast<std::uint8_t>(std::clamp(std::lround(lerp_channel(ca, cb, t)), 0L, 255L));
      };
      const Rgb8 r{sample(a.r, b.r), sample(a.g, b.g), sample(a.b, b.b)};
      const Rgb8 l = left(x, y);
      auto amp = [&](std::uint8_t p, std::uint8_t q) {
        const double v = gain * std::abs(static_cast<double>(p) - static_cast<double>(q));
        return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      };
      out.resampled(x, y) = r;
      out.diff(x, y) = {amp(l.r, r.r), amp(l.g, r.g), amp(l.b, r.b)};
    }
  }
  return out;
}

RangeStats range_stats(const Raster<double>& map, const MaskMap& mask) {
  if (!map.same_shape(mask)) throw InvalidArgument("range_stats: map and mask dimensions differ");
  std::vector<double> values;
  values.reserve(map.size());
  auto px = map.pixels();
  auto labels = mask.pixels();
  for (std::size_t i = 0; i < px.size(); ++i)
    if (is_valid(px[i]) && labels[i] == MaskLabel::valid) values.push_back(px[i]);
  if (values.empty()) throw InvalidArgument("range_stats: no valid pixels");

  std::sort(values.begin(), values.end());
  auto percentile = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  RangeStats s;
  s.count = values.size();
  s.min = values.front();
  s.max = values.back();
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.p01 = percentile(0.01);
  s.p99 = percentile(0.99);
  return s;
}

std::array<std::size_t, kMaskLabelCount> label_counts(const MaskMap& mask) {
  std::array<std::size_t, kMaskLabelCount> counts{};
  for (MaskLabel l : mask.pixels()) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

}  // namespace stereoref
