#include "endonav/devicesim/device_sim.hpp"

#include <algorithm>
#include <cmath>

#include "endonav/errors.hpp"

namespace endonav::sim {
namespace {

constexpr double kGridTol = 1e-9;
constexpr double kLengthTol = 1e-12;

bool on_grid(double s) { return std::abs(s - std::round(s)) < kGridTol; }

// Nearest point at which the device surface stays inside the lumen.
Vec3 clamp_to_lumen(const VesselTree& tree, const Vec3& p, double device_radius) {
  return tree.project_into_lumen(p, device_radius).point;
}

struct Extension {
  const VesselTree& tree;
  const DeviceParams& device;
  double roll;
  bool straight;
  std::size_t step;
  std::vector<ContactSample>& contacts;
};

// One move of at most 1 mm that never crosses a grid point.
void move(SimState& st, const Extension& ext, double length) {
  const double s = st.arc.back();
  const Vec3 p = st.trace.back();
  const bool grid = on_grid(s);
  const double next = grid ? std::round(s) + 1.0 : std::ceil(s);
  const bool reaches = next - s <= length + kLengthTol;
  const double step_len = reaches ? next - s : length;

  Vec3 d;
  if (grid) {
    const Vec3& h = st.heading.back();
    const double bend =
        ext.straight ? 0.0
                     : ext.device.tip_bend_angle * std::min(1.0, 1.0 / ext.device.tip_segment_length);
    d = (std::cos(bend) * h + std::sin(bend) * bend_direction(h, ext.roll)).normalized();
  } else {
    d = st.direction.back();
  }

  const double r_dev = ext.device.radius();
  const Vec3 candidate = p + step_len * d;
  const auto proj = ext.tree.project_into_lumen(candidate, r_dev);
  Vec3 target = candidate;
  if (!proj.inside) {
    const Vec3 n = (candidate - proj.center).normalized();
    Vec3 slide = d - d.dot(n) * n;
    if (slide.norm() < 1e-9) {
      // Head-on into the wall: continue along the vessel.
      const Vec3 tan = ext.tree.nearest_lumen_point(p).tangent;
      slide = tan.dot(d) >= 0.0 ? tan : Vec3(-tan);
    }
    slide.normalize();
    target = clamp_to_lumen(ext.tree, p + step_len * slide, r_dev);
    ContactSample c;
    c.penetration = proj.overshoot;
    c.force = -ext.device.wall_stiffness * proj.overshoot * n;
    c.location = target;
    c.step = ext.step;
    ext.contacts.push_back(c);
  }

  // Radial clamping near bends and tapers can lengthen the move. Re-aim at
  // the clamped point with the step length until the move fits.
  for (int k = 0; k < 16 && (target - p).norm() > step_len * (1.0 + 1e-12); ++k)
    target = clamp_to_lumen(ext.tree, p + step_len * (target - p).normalized(), r_dev);
  // No admissible point at this distance: the tip stalls.
  if ((target - p).norm() > step_len * (1.0 + 1e-12)) target = p;
  const auto q = ext.tree.nearest_lumen_point(target);

  const Vec3 disp = target - p;
  const double disp_norm = disp.norm();
  const Vec3 actual = disp_norm > 1e-12 ? Vec3(disp / disp_norm) : d;
  Vec3 t = q.tangent;
  if (t.dot(actual) < 0.0) t = -t;
  const double lambda = ext.device.tangent_blend;
  Vec3 h = (1.0 - lambda) * actual + lambda * t;
  h = h.norm() > 1e-12 ? Vec3(h.normalized()) : actual;

  st.trace.push_back(target);
  st.arc.push_back(reaches ? next : s + step_len);
  st.heading.push_back(h);
  st.direction.push_back(d);
}

void extend(SimState& st, const Extension& ext, double length) {
  double remaining = length;
  while (remaining > kLengthTol) {
    const double before = st.arc.back();
    move(st, ext, remaining);
    remaining -= st.arc.back() - before;
  }
}

void truncate(SimState& st, const VesselTree& tree, double s, double device_radius) {
  std::size_t i = st.arc.size() - 1;
  while (i > 0 && st.arc[i] > s) --i;
  if (std::abs(st.arc[i] - s) <= kLengthTol || i + 1 >= st.arc.size()) {
    st.trace.resize(i + 1);
    st.arc.resize(i + 1);
    st.heading.resize(i + 1);
    st.direction.resize(i + 1);
    return;
  }
  const double f = (s - st.arc[i]) / (st.arc[i + 1] - st.arc[i]);
  const Vec3 p = clamp_to_lumen(tree, st.trace[i] + f * (st.trace[i + 1] - st.trace[i]),
                                device_radius);
  const Vec3 dir = st.direction[i + 1];
  st.trace.resize(i + 1);
  st.arc.resize(i + 1);
  st.heading.resize(i + 1);
  st.direction.resize(i + 1);
  st.trace.push_back(p);
  st.arc.push_back(s);
  st.heading.push_back(dir);
  st.direction.push_back(dir);
}

Vec3 heading_at(const SimState& st, double s) {
  if (s >= st.arc.back()) return st.heading.back();
  const auto it = std::upper_bound(st.arc.begin(), st.arc.end(), s);
  const auto k = static_cast<std::size_t>(std::distance(st.arc.begin(), it));
  return st.direction[std::min(k, st.direction.size() - 1)];
}

StepOutcome observe(const SimState& st, std::vector<ContactSample> contacts, double displacement) {
  StepOutcome out;
  const double s = st.guidewire.insertion_length;
  for (std::size_t k = 0; k < 3; ++k)
    out.tracking_points[k] = st.point_at(std::max(0.0, s - kTrackingSpacing * static_cast<double>(k)));
  out.contacts = std::move(contacts);
  out.tip_displacement = displacement;
  return out;
}

}  // namespace

DeviceParams DeviceParams::guidewire() { return DeviceParams{}; }

DeviceParams DeviceParams::catheter() {
  DeviceParams p;
  p.outer_diameter = 0.0441 * kInch;
  p.tip_bend_angle = 0.0;
  return p;
}

void validate(const DeviceParams& p) {
  if (!(p.outer_diameter > 0.0)) throw ArgumentError("device outer_diameter must be > 0");
  if (!(p.tip_bend_angle >= 0.0 && p.tip_bend_angle < 0.5 * std::numbers::pi))
    throw ArgumentError("device tip_bend_angle must lie in [0, pi/2)");
  if (!(p.tip_segment_length > 0.0)) throw ArgumentError("device tip_segment_length must be > 0");
  if (!(p.wall_stiffness > 0.0)) throw ArgumentError("device wall_stiffness must be > 0");
  if (!(p.tangent_blend >= 0.0 && p.tangent_blend <= 1.0))
    throw ArgumentError("device tangent_blend must lie in [0, 1]");
  if (p.max_translation_speed != kMaxTranslationSpeed || p.max_rotation_speed != kMaxRotationSpeed)
    throw ArgumentError("device speed limits are fixed at 40 mm/s and 180 deg/s");
}

Vec3 bend_direction(const Vec3& heading, double roll) {
  Vec3 ref = Vec3::UnitZ() - heading.dot(Vec3::UnitZ()) * heading;
  if (ref.norm() < 1e-9) ref = Vec3::UnitX() - heading.dot(Vec3::UnitX()) * heading;
  ref.normalize();
  const Vec3 side = heading.cross(ref);
  return std::cos(roll) * ref + std::sin(roll) * side;
}

Vec3 SimState::point_at(double s) const {
  if (s <= arc.front()) return trace.front();
  if (s >= arc.back()) return trace.back();
  const auto it = std::upper_bound(arc.begin(), arc.end(), s);
  const auto k = static_cast<std::size_t>(std::distance(arc.begin(), it));
  const double f = (s - arc[k - 1]) / (arc[k] - arc[k - 1]);
  return trace[k - 1] + f * (trace[k] - trace[k - 1]);
}

Vec3 SimState::tip_position(Device d) const { return point_at(device(d).insertion_length); }

Device SimState::leader() const {
  return guidewire.insertion_length >= catheter.insertion_length ? Device::Guidewire
                                                                   : Device::Catheter;
}

std::vector<Vec3> SimState::traced_path(Device d) const {
  const double s = device(d).insertion_length;
  std::vector<Vec3> out;
  for (std::size_t k = 0; k < arc.size() && arc[k] < s; ++k) out.push_back(trace[k]);
  out.push_back(point_at(s));
  return out;
}

Placement reset_devices(const VesselTree& tree, const Vec3& insertion_point,
                        const Vec3& initial_heading, const SimParams& params) {
  validate(params.guidewire);
  validate(params.catheter);
  if (!(initial_heading.norm() > 0.0)) throw ArgumentError("initial heading must be non-zero");
  const auto outside = tree.project_into_lumen(insertion_point);
  if (!outside.inside)
    throw PlacementError("insertion point lies " + std::to_string(outside.overshoot) +
                         " mm outside the lumen");

  const double r_gw = params.guidewire.radius();
  Placement out;
  SimState& st = out.state;
  const Vec3 h = initial_heading.normalized();
  st.trace = {clamp_to_lumen(tree, insertion_point, std::max(r_gw, params.catheter.radius()))};
  st.arc = {0.0};
  st.heading = {h};
  st.direction = {h};

  std::vector<ContactSample> contacts;
  extend(st, Extension{tree, params.guidewire, 0.0, true, 0, contacts}, kInitialProtrusion);
  st.guidewire.insertion_length = st.trace_length();
  st.guidewire.tip_heading = st.heading.back();
  st.catheter.insertion_length = 0.0;
  st.catheter.tip_heading = heading_at(st, 0.0);
  out.outcome = observe(st, std::move(contacts), 0.0);
  return out;
}

StepOutcome sim_step(SimState& st, const VesselTree& tree, const DeviceCommand& command,
                     double dt, const SimParams& params) {
  const auto clampv = [](double v, double lim) { return std::clamp(v, -lim, lim); };
  const double v_gw = clampv(command[0], params.guidewire.max_translation_speed);
  const double w_gw = clampv(command[1], params.guidewire.max_rotation_speed);
  const double v_c = clampv(command[2], params.catheter.max_translation_speed);
  const double w_c = clampv(command[3], params.catheter.max_rotation_speed);

  st.guidewire.roll += w_gw * dt;
  st.catheter.roll += w_c * dt;
  const Vec3 old_tip = st.tip_position(Device::Guidewire);

  const double s_gw = std::max(0.0, st.guidewire.insertion_length + v_gw * dt);
  const double s_c = std::max(0.0, st.catheter.insertion_length + v_c * dt);
  const double end = st.trace_length();
  const double new_end = std::max(s_gw, s_c);

  std::vector<ContactSample> contacts;
  const Device lead = s_gw >= s_c ? Device::Guidewire : Device::Catheter;
  const DeviceParams& lead_params =
      lead == Device::Guidewire ? params.guidewire : params.catheter;
  if (new_end < end - kLengthTol) {
    truncate(st, tree, new_end, lead_params.radius());
  } else if (new_end > end + kLengthTol) {
    const double roll = lead == Device::Guidewire ? st.guidewire.roll : st.catheter.roll;
    extend(st, Extension{tree, lead_params, roll, false, st.step_index, contacts},
           new_end - end);
  }

  const double len = st.trace_length();
  st.guidewire.insertion_length = lead == Device::Guidewire ? len : std::min(s_gw, len);
  st.catheter.insertion_length = lead == Device::Catheter ? len : std::min(s_c, len);
  st.guidewire.tip_heading = heading_at(st, st.guidewire.insertion_length);
  st.catheter.tip_heading = heading_at(st, st.catheter.insertion_length);

  const double displacement = (st.tip_position(Device::Guidewire) - old_tip).norm();
  ++st.step_index;
  return observe(st, std::move(contacts), displacement);
}

double tip_force_norm(std::span<const ContactSample> contacts) {
  double best = 0.0;
  for (const auto& c : contacts) best = std::max(best, c.force.norm());
  return best;
}

}  // namespace endonav::sim
