#include "stereoref/raster.hpp"

namespace stereoref {

bool maps_equal(const Raster<double>& a, const Raster<double>& b) {
  if (!a.same_shape(b)) return false;
  auto pa = a.pixels();
  auto pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const bool va = is_valid(pa[i]);
    if (va != is_valid(pb[i])) return false;
    if (va && pa[i] != pb[i]) return false;
  }
  return true;
}

}  // namespace stereoref
