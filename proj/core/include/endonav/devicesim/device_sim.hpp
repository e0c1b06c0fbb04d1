#pragma once

// Quasi-static follow-the-leader model of a coaxial guidewire + catheter in a
// rigid vessel tree. Both devices share one traced path: the body of each
// device occupies the path prefix up to its insertion length, and whichever
// tip is further inserted extends the path.
//
// The path is extended on a 1 mm arc grid. At every grid point the leading
// tip commits to a direction
//     d = normalize(cos(b_seg) h + sin(b_seg) b(roll)),
//     b_seg = tip_bend_angle * (1 mm / tip_segment_length)
// which holds until the next grid point. A move whose free-motion candidate
// leaves the lumen is projected onto the wall (sliding, no friction) and
// records a contact with |F| = k * overshoot. On arrival the heading relaxes
// towards the local centerline tangent:
//     h' = normalize((1 - lambda) d_actual + lambda t).

#include <array>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "endonav/vessel/tree.hpp"

namespace endonav::sim {

using vessel::Vec3;
using vessel::VesselTree;

inline constexpr double kMaxTranslationSpeed = 40.0;            // mm/s
inline constexpr double kMaxRotationSpeed = std::numbers::pi;   // rad/s (180 deg/s)
inline constexpr double kControlPeriod = 0.135;                 // s; 200 steps ~ 27 s
inline constexpr double kInitialProtrusion = 3.0;               // mm
inline constexpr double kTrackingSpacing = 2.0;                 // mm
inline constexpr double kInch = 25.4;                           // mm

struct DeviceParams {
  double outer_diameter = 0.035 * kInch;
  double tip_bend_angle = 30.0 * std::numbers::pi / 180.0;
  double tip_segment_length = 4.0;
  double wall_stiffness = 2.0;  // N/mm
  double tangent_blend = 0.3;
  double max_translation_speed = kMaxTranslationSpeed;
  double max_rotation_speed = kMaxRotationSpeed;

  double radius() const { return 0.5 * outer_diameter; }

  // 0.035" angled-tip guidewire.
  static DeviceParams guidewire();
  // 0.0441" straight multipurpose catheter.
  static DeviceParams catheter();
};

// Throws ArgumentError.
void validate(const DeviceParams& params);

struct SimParams {
  DeviceParams guidewire = DeviceParams::guidewire();
  DeviceParams catheter = DeviceParams::catheter();
};

enum class Device { Guidewire, Catheter };

struct DeviceState {
  double insertion_length = 0.0;  // arc position of the tip along the traced path
  double roll = 0.0;
  Vec3 tip_heading = Vec3::UnitY();

  friend bool operator==(const DeviceState&, const DeviceState&) = default;
};

struct SimState {
  // Shared traced path. arc[k] is the insertion arc of point k; points fall on
  // the 1 mm grid except the path end and truncation points.
  std::vector<Vec3> trace;
  std::vector<double> arc;
  std::vector<Vec3> heading;    // leading-tip heading on arrival at each point
  std::vector<Vec3> direction;  // committed grid-segment direction into each point
  DeviceState guidewire;
  DeviceState catheter;
  std::size_t step_index = 0;

  double trace_length() const { return arc.back(); }
  Vec3 point_at(double s) const;
  Vec3 tip_position(Device device) const;
  const DeviceState& device(Device d) const { return d == Device::Guidewire ? guidewire : catheter; }
  Device leader() const;
  // Points of the path occupied by a device body (prefix of the trace).
  std::vector<Vec3> traced_path(Device device) const;

  friend bool operator==(const SimState&, const SimState&) = default;
};

struct ContactSample {
  Vec3 force = Vec3::Zero();  // N, along the inward wall normal
  double penetration = 0.0;   // mm
  Vec3 location = Vec3::Zero();
  std::size_t step = 0;
};

struct StepOutcome {
  std::array<Vec3, 3> tracking_points;  // guidewire tip, 2 mm and 4 mm back
  std::vector<ContactSample> contacts;
  double tip_displacement = 0.0;  // guidewire tip, mm
};

struct Placement {
  SimState state;
  StepOutcome outcome;
};

// (v_gw mm/s, w_gw rad/s, v_cath mm/s, w_cath rad/s)
using DeviceCommand = std::array<double, 4>;

// Collapses both devices onto the insertion point and protrudes the
// guidewire 3 mm along `initial_heading`. Throws PlacementError when the
// point is outside the lumen.
Placement reset_devices(const VesselTree& tree, const Vec3& insertion_point,
                        const Vec3& initial_heading, const SimParams& params = {});

// Advances the coaxial pair by one control period. Commands beyond the
// device speed limits are clamped.
StepOutcome sim_step(SimState& state, const VesselTree& tree, const DeviceCommand& command,
                     double dt, const SimParams& params = {});

// Largest contact force magnitude in a step, 0 without contact.
double tip_force_norm(std::span<const ContactSample> contacts);

// Bend-plane direction: the reference normal (global +z, or +x when the
// heading is parallel to z) projected perpendicular to `heading`, rotated
// about `heading` by `roll`.
Vec3 bend_direction(const Vec3& heading, double roll);

}  // namespace endonav::sim
