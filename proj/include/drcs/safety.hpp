#pragma once

#include <vector>

#include "drcs/linalg.hpp"

namespace drcs {

/// Safe side is {z : c'z <= d}.
struct HalfSpace {
  VectorXd c;
  double d = 0.0;
};

struct ConvexRegion {
  std::vector<HalfSpace> faces;
  /// Optional per-face risk weights summing to one; empty means a uniform split.
  std::vector<double> face_weights;

  int dim() const { return faces.empty() ? 0 : static_cast<int>(faces.front().c.size()); }
};

struct SafeSet {
  std::vector<ConvexRegion> regions;
  int dim() const { return regions.empty() ? 0 : regions.front().dim(); }
};

bool contains(const ConvexRegion& region, const VectorXd& z);
bool contains(const SafeSet& set, const VectorXd& z);

/// min over faces of (d - c'z) / ||c||.
double region_margin(const ConvexRegion& region, const VectorXd& z);

/// max over regions of region_margin; positive iff z is strictly inside some region.
double min_signed_margin(const SafeSet& set, const VectorXd& z);

/// delta_s / n_l. Throws std::invalid_argument unless 0 < delta_s < 1 and n_l >= 1.
double allocate_risk(double delta_s, int n_l);

/// Per-face risk of a region: delta_s / n_l, or delta_s * weight when weights are given.
std::vector<double> face_risks(const ConvexRegion& region, double delta_s);

/// Radius of the largest ball inside the region (capped at `cap`); negative if the region is empty.
double chebyshev_radius(const ConvexRegion& region, double cap = 1.0);

/// Throws std::invalid_argument for zero normals, inconsistent dimensions, bad weights or empty regions.
void validate(const SafeSet& set);

}  // namespace drcs
