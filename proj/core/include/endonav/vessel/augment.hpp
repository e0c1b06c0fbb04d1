#pragma once

#include <numbers>

#include "endonav/rng.hpp"
#include "endonav/vessel/tree.hpp"

namespace endonav::vessel {

inline constexpr double kAugmentScaleMin = 0.7;
inline constexpr double kAugmentScaleMax = 1.3;
inline constexpr double kAugmentMaxRotation = 30.0 * std::numbers::pi / 180.0;

// Per-episode anatomy perturbation: p -> Ry(rot_y) * Rx(rot_x) * diag(scale) * p.
struct AugmentParams {
  Vec3 scale = Vec3::Ones();
  double rot_x = 0.0;
  double rot_y = 0.0;

  friend bool operator==(const AugmentParams&, const AugmentParams&) = default;
};

AugmentParams draw_augment_params(Rng& rng);

// Throws ArgumentError when params are outside the allowed ranges.
void validate(const AugmentParams& params);

Eigen::Matrix3d augment_matrix(const AugmentParams& params);

// Radius factor for a cross-section whose centerline tangent is `tangent`:
// sqrt(det(S) / |S t|), the geometric mean of the transverse scale factors.
double radius_scale(const Vec3& scale, const Vec3& tangent);

VesselTree apply_augmentation(const VesselTree& tree, const AugmentParams& params);

}  // namespace endonav::vessel
