#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "stereoref/rig.hpp"

namespace stereoref::testing {

Mat3 exp_so3(const Vec3& w);

// Gradient-free Nelder-Mead minimisation in R^3. Stops when the simplex
// spread in both position and value falls below tol.
Vec3 nelder_mead(const std::function<double(const Vec3&)>& f, const Vec3& start, double step, double tol,
                 int max_iter = 20000);

enum class RotationCost {
  geodesic,  // sum of squared rotation angles
  chordal,   // sum of sin^2(angle / 2), the quaternion distance
};

// Brute-force minimiser of the summed cost over SO(3), parameterised locally
// as base * exp(w) and re-centred until the step vanishes. Starts from the
// first rotation.
Mat3 brute_force_rotation_mean(std::span<const Mat3> rotations, RotationCost cost);

// Five rotations around a random centre, each displaced by an angle uniform
// in [0, 30 deg) about a random axis, redrawn until every pairwise geodesic
// distance is below 30 deg.
std::vector<Mat3> dispersed_rotation_set(std::mt19937_64& rng, std::size_t n = 5, double max_dispersion_deg = 30.0);

// Largest pairwise geodesic distance, radians.
double set_diameter(std::span<const Mat3> rotations);

}  // namespace stereoref::testing
