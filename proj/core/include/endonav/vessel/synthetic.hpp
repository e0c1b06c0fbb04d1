#pragma once

// Parametric stand-in for CTA-derived anatomies. The aortic model is a single
// "aorta" branch (common iliac -> descending aorta -> arch -> ascending
// aorta) with three arch branches and the two carotid bifurcations:
//
//   aorta ─┬─ bct ── rcca ── rica
//          ├─ lcca ── lica
//          └─ lsa
//
// Coordinates: x towards the patient's left, y superior, z anterior. The
// finished tree is translated so its bounding box is centred on the origin,
// which is also the pivot of augmentation rotations.

#include <numbers>

#include "endonav/rng.hpp"
#include "endonav/vessel/tree.hpp"

namespace endonav::vessel {

inline constexpr double kDeg = std::numbers::pi / 180.0;

struct AnatomySpec {
  ArchType arch_type = ArchType::TypeI;

  double iliac_length = 40.0;
  double trunk_length = 150.0;  // descending aorta
  double arch_radius = 28.0;
  double arch_depth = 8.0;  // posterior/anterior offset of descending/ascending limbs
  // Vertical stretch of the arch for Type-II anatomies; branch origins end up
  // lower relative to the apex and further along the aorta.
  double type2_arch_stretch = 1.6;
  double ascending_length = 40.0;

  // Branch origins as arch angle measured from the descending limb.
  double lsa_origin = 55.0 * kDeg;
  double lcca_origin = 78.0 * kDeg;
  double bct_origin = 102.0 * kDeg;

  // Take-off tilt from vertical, positive towards the patient's left.
  double lsa_takeoff = 30.0 * kDeg;
  double lcca_takeoff = 12.0 * kDeg;
  double bct_takeoff = -28.0 * kDeg;
  double rcca_takeoff = 8.0 * kDeg;   // relative to vertical, off the bct
  double ica_takeoff = 32.0 * kDeg;   // from the CCA axis, posterolateral
  double takeoff_jitter = 8.0 * kDeg;  // uniform +- on every take-off tilt

  double bct_length = 45.0;
  double rcca_origin_s = 30.0;  // on the bct
  double lsa_length = 60.0;
  double cca_length = 100.0;
  double ica_origin_s = 70.0;  // carotid bifurcation on each CCA
  double ica_length = 60.0;

  double iliac_radius = 5.0;
  double aorta_radius = 11.0;
  double bct_radius = 6.0;
  double lsa_radius = 4.5;
  double cca_radius = 3.6;
  double ica_radius = 2.8;
  double radius_noise = 0.1;  // relative, uniform +- per branch
};

// Deterministic per rng state. Throws ArgumentError on a spec that could
// produce non-positive radii or lengths.
VesselTree generate_synthetic_anatomy(const AnatomySpec& spec, Rng& rng);

// Y-shaped trunk ("trunk") splitting into "left" and "right" children.
struct BifurcationSpec {
  double trunk_length = 50.0;
  double child_length = 50.0;
  double split_angle = 35.0 * kDeg;  // each child's deviation from the trunk axis
  double trunk_radius = 6.0;
  double child_radius = 4.0;
};

VesselTree generate_bifurcation(const BifurcationSpec& spec);

// Single straight branch "tube" from `start` along `direction`.
VesselTree straight_tube(const Vec3& start, const Vec3& direction, double length, double radius);

}  // namespace endonav::vessel
