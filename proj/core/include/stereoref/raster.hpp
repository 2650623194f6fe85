#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "stereoref/errors.hpp"

namespace stereoref {

// Row-major 2D grid. Pixel (x, y) has image coordinates u = x, v = y.
template <class T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw InvalidArgument("raster dimensions must be non-negative");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }

  void fill(const T& value) { std::fill(data_.begin(), data_.end(), value); }

  template <class U>
  bool same_shape(const Raster<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Raster& a, const Raster& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

struct Rgb8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

using ColorImage = Raster<Rgb8>;

// Sentinel for pixels without a value in depth and disparity maps.
inline constexpr double kInvalid = std::numeric_limits<double>::quiet_NaN();
inline bool is_valid(double v) { return !std::isnan(v); }

// Metric depth per pixel (mm); NaN where no surface was rendered.
class DepthMap : public Raster<double> {
 public:
  DepthMap() = default;
  DepthMap(int width, int height) : Raster<double>(width, height, kInvalid) {}
  explicit DepthMap(Raster<double> r) : Raster<double>(std::move(r)) {}
};

// Left-to-right disparity per pixel (px); NaN where undefined.
class DisparityMap : public Raster<double> {
 public:
  DisparityMap() = default;
  DisparityMap(int width, int height) : Raster<double>(width, height, kInvalid) {}
  explicit DisparityMap(Raster<double> r) : Raster<double>(std::move(r)) {}
};

// NaN-aware equality: two maps are equal when invalid pixels coincide and
// valid pixels compare equal.
bool maps_equal(const Raster<double>& a, const Raster<double>& b);

enum class MaskLabel : std::uint8_t {
  valid = 0,
  occluded_left = 1,
  occluded_right = 2,
  non_overlap = 3,
  outside_model = 4,
};

inline constexpr int kMaskLabelCount = 5;

inline bool is_occluded(MaskLabel l) {
  return l == MaskLabel::occluded_left || l == MaskLabel::occluded_right;
}

using MaskMap = Raster<MaskLabel>;

}  // namespace stereoref
