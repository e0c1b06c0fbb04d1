#include "endonav/vessel/synthetic.hpp"

#include <cmath>

#include "endonav/errors.hpp"

namespace endonav::vessel {
namespace {

constexpr double kStep = 1.0;

Vec3 tilt(double angle, const Vec3& lateral) {
  return (std::cos(angle) * Vec3::UnitY() + std::sin(angle) * lateral).normalized();
}

// Curve starting at `start` heading `d0` whose direction blends linearly
// into `d1` over the first `bend` mm.
std::vector<Vec3> grow(const Vec3& start, const Vec3& d0, const Vec3& d1, double bend,
                       double length) {
  std::vector<Vec3> pts{start};
  Vec3 p = start;
  const int steps = static_cast<int>(std::ceil(length / kStep));
  const double h = length / steps;
  for (int i = 0; i < steps; ++i) {
    const double f = bend > 0.0 ? std::min(1.0, (i + 0.5) * h / bend) : 1.0;
    const Vec3 d = ((1.0 - f) * d0 + f * d1).normalized();
    p += h * d;
    pts.push_back(p);
  }
  return pts;
}

double arc_at_index(const std::vector<Vec3>& pts, std::size_t idx) {
  double arc = 0.0;
  for (std::size_t k = 1; k <= idx; ++k) arc += (pts[k] - pts[k - 1]).norm();
  return arc;
}

// Position and arc coordinate at arc `s` along a polyline.
std::pair<Vec3, double> point_at_arc(const std::vector<Vec3>& pts, double s) {
  double arc = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    const double len = (pts[k] - pts[k - 1]).norm();
    if (arc + len >= s) {
      const double f = (s - arc) / len;
      return {pts[k - 1] + f * (pts[k] - pts[k - 1]), s};
    }
    arc += len;
  }
  return {pts.back(), arc};
}

BranchDraft make_draft(std::string id, std::optional<std::string> parent, double parent_s,
                       std::vector<Vec3> pts, double r0, double r1) {
  BranchDraft d;
  d.id = std::move(id);
  d.parent_id = std::move(parent);
  d.parent_s = parent_s;
  const double total = arc_at_index(pts, pts.size() - 1);
  double arc = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (k > 0) arc += (pts[k] - pts[k - 1]).norm();
    const double f = total > 0.0 ? arc / total : 0.0;
    d.radii.push_back(r0 + f * (r1 - r0));
  }
  d.positions = std::move(pts);
  return d;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw ArgumentError(std::string("anatomy spec: ") + what + " must be > 0");
}

}  // namespace

VesselTree generate_synthetic_anatomy(const AnatomySpec& spec, Rng& rng) {
  require_positive(spec.iliac_length, "iliac_length");
  require_positive(spec.trunk_length, "trunk_length");
  require_positive(spec.arch_radius, "arch_radius");
  require_positive(spec.ascending_length, "ascending_length");
  require_positive(spec.bct_length, "bct_length");
  require_positive(spec.lsa_length, "lsa_length");
  require_positive(spec.cca_length, "cca_length");
  require_positive(spec.ica_length, "ica_length");
  if (!(spec.radius_noise >= 0.0 && spec.radius_noise < 1.0))
    throw ArgumentError("anatomy spec: radius_noise must lie in [0, 1)");
  for (double r : {spec.iliac_radius, spec.aorta_radius, spec.bct_radius, spec.lsa_radius,
                   spec.cca_radius, spec.ica_radius})
    if (!(r * (1.0 - spec.radius_noise) > 0.0))
      throw ArgumentError("anatomy spec: radii must stay positive under noise");
  if (!(spec.rcca_origin_s > 0.0 && spec.rcca_origin_s < spec.bct_length))
    throw ArgumentError("anatomy spec: rcca_origin_s must lie inside the bct");
  if (!(spec.ica_origin_s > 0.0 && spec.ica_origin_s < spec.cca_length))
    throw ArgumentError("anatomy spec: ica_origin_s must lie inside the CCA");
  if (spec.arch_type == ArchType::TypeII && !(spec.type2_arch_stretch >= 1.0))
    throw ArgumentError("anatomy spec: type2_arch_stretch must be >= 1");

  // Random draws in a fixed order: take-off jitter first, then radius noise.
  auto jitter = [&] { return rng.uniform(-spec.takeoff_jitter, spec.takeoff_jitter); };
  const double j_lsa = jitter();
  const double j_lcca = jitter();
  const double j_bct = jitter();
  const double j_rcca = jitter();
  const double j_lica = jitter();
  const double j_rica = jitter();
  auto noise = [&] { return 1.0 + rng.uniform(-spec.radius_noise, spec.radius_noise); };
  const double n_aorta = noise();
  const double n_bct = noise();
  const double n_lcca = noise();
  const double n_lsa = noise();
  const double n_rcca = noise();
  const double n_rica = noise();
  const double n_lica = noise();

  const double R = spec.arch_radius;
  const double stretch = spec.arch_type == ArchType::TypeII ? spec.type2_arch_stretch : 1.0;
  const double top = spec.trunk_length;
  const Vec3 left = Vec3::UnitX();
  const Vec3 right = -Vec3::UnitX();

  // Aorta: iliac -> descending -> arch -> ascending, one polyline.
  std::vector<Vec3> aorta;
  const Vec3 bifurcation(R, 0.0, -spec.arch_depth);
  const Vec3 iliac_dir = Vec3(std::sin(25.0 * kDeg), -std::cos(25.0 * kDeg), 0.0);
  const int n_il = static_cast<int>(std::ceil(spec.iliac_length / kStep));
  for (int i = n_il; i > 0; --i)
    aorta.push_back(bifurcation + (spec.iliac_length * i / n_il) * iliac_dir);
  const int n_desc = static_cast<int>(std::ceil(top / kStep));
  for (int i = 0; i <= n_desc; ++i)
    aorta.push_back(bifurcation + Vec3(0.0, top * i / n_desc, 0.0));
  const double desc_end_arc = arc_at_index(aorta, aorta.size() - 1);

  auto arch_point = [&](double theta) {
    return Vec3(R * std::cos(theta), top + stretch * R * std::sin(theta),
                -spec.arch_depth * std::cos(theta));
  };
  const int n_arch = 180;
  std::vector<double> arch_theta;
  for (int i = 1; i <= n_arch; ++i) arch_theta.push_back(std::numbers::pi * i / n_arch);
  // Branch origins become exact polyline vertices.
  for (double t : {spec.lsa_origin, spec.lcca_origin, spec.bct_origin}) arch_theta.push_back(t);
  std::sort(arch_theta.begin(), arch_theta.end());
  arch_theta.erase(std::unique(arch_theta.begin(), arch_theta.end(),
                               [](double a, double b) { return std::abs(a - b) < 1e-9; }),
                   arch_theta.end());
  std::size_t lsa_idx = 0;
  std::size_t lcca_idx = 0;
  std::size_t bct_idx = 0;
  for (double t : arch_theta) {
    aorta.push_back(arch_point(t));
    if (std::abs(t - spec.lsa_origin) < 1e-9) lsa_idx = aorta.size() - 1;
    if (std::abs(t - spec.lcca_origin) < 1e-9) lcca_idx = aorta.size() - 1;
    if (std::abs(t - spec.bct_origin) < 1e-9) bct_idx = aorta.size() - 1;
  }
  const Vec3 asc_top = arch_point(std::numbers::pi);
  const int n_asc = static_cast<int>(std::ceil(spec.ascending_length / kStep));
  for (int i = 1; i <= n_asc; ++i)
    aorta.push_back(asc_top - Vec3(0.0, spec.ascending_length * i / n_asc, 0.0));

  // Radius profile along the aorta: iliac taper, then constant.
  BranchDraft aorta_d;
  aorta_d.id = "aorta";
  {
    double arc = 0.0;
    const double il_arc = arc_at_index(aorta, static_cast<std::size_t>(n_il));
    for (std::size_t k = 0; k < aorta.size(); ++k) {
      if (k > 0) arc += (aorta[k] - aorta[k - 1]).norm();
      double r;
      if (arc <= il_arc) {
        r = spec.iliac_radius + (0.8 * spec.aorta_radius - spec.iliac_radius) * arc / il_arc;
      } else if (arc <= desc_end_arc) {
        const double f = (arc - il_arc) / (desc_end_arc - il_arc);
        r = (0.8 + 0.2 * f) * spec.aorta_radius;
      } else {
        r = spec.aorta_radius;
      }
      aorta_d.radii.push_back(r * n_aorta);
    }
    aorta_d.positions = aorta;
  }

  std::vector<BranchDraft> drafts;
  drafts.push_back(aorta_d);

  // Brachiocephalic trunk: up and to the right, turning lateral (subclavian).
  const Vec3 bct_start = aorta[bct_idx];
  auto bct = grow(bct_start, tilt(spec.bct_takeoff + j_bct, left), right, spec.bct_length * 1.4,
                  spec.bct_length);
  drafts.push_back(make_draft("bct", "aorta", arc_at_index(aorta, bct_idx), bct,
                              spec.bct_radius * n_bct, 0.8 * spec.bct_radius * n_bct));

  // Left common carotid.
  auto lcca = grow(aorta[lcca_idx], tilt(spec.lcca_takeoff + j_lcca, left), Vec3::UnitY(), 30.0,
                   spec.cca_length);
  drafts.push_back(make_draft("lcca", "aorta", arc_at_index(aorta, lcca_idx), lcca,
                              spec.cca_radius * n_lcca, 0.9 * spec.cca_radius * n_lcca));

  // Left subclavian: up-left, turning lateral.
  auto lsa = grow(aorta[lsa_idx], tilt(spec.lsa_takeoff + j_lsa, left), left,
                  spec.lsa_length * 1.5, spec.lsa_length);
  drafts.push_back(make_draft("lsa", "aorta", arc_at_index(aorta, lsa_idx), lsa,
                              spec.lsa_radius * n_lsa, 0.8 * spec.lsa_radius * n_lsa));

  // Right common carotid off the bct.
  const auto [rcca_start, rcca_s] = point_at_arc(bct, spec.rcca_origin_s);
  auto rcca = grow(rcca_start, tilt(-(spec.rcca_takeoff + j_rcca), left), Vec3::UnitY(), 30.0,
                   spec.cca_length);
  drafts.push_back(make_draft("rcca", "bct", rcca_s, rcca, spec.cca_radius * n_rcca,
                              0.9 * spec.cca_radius * n_rcca));

  // Internal carotids branch posterolaterally and straighten upwards.
  auto ica = [&](const std::vector<Vec3>& cca, const Vec3& lateral, double j, double n,
                 const char* id, const char* parent) {
    const auto [start, s] = point_at_arc(cca, spec.ica_origin_s);
    const double a = spec.ica_takeoff + j;
    const Vec3 d0 =
        (std::cos(a) * Vec3::UnitY() + std::sin(a) * (0.6 * lateral - 0.8 * Vec3::UnitZ()))
            .normalized();
    auto pts = grow(start, d0, Vec3::UnitY(), 25.0, spec.ica_length);
    return make_draft(id, parent, s, pts, spec.ica_radius * n, 0.9 * spec.ica_radius * n);
  };
  drafts.push_back(ica(rcca, right, j_rica, n_rica, "rica", "rcca"));
  drafts.push_back(ica(lcca, left, j_lica, n_lica, "lica", "lcca"));

  // Centre the bounding box on the origin.
  Vec3 lo = Vec3::Constant(1e300);
  Vec3 hi = Vec3::Constant(-1e300);
  for (const auto& d : drafts)
    for (const auto& p : d.positions) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  const Vec3 centre = 0.5 * (lo + hi);
  for (auto& d : drafts)
    for (auto& p : d.positions) p -= centre;

  return VesselTree::build(std::move(drafts), spec.arch_type);
}

VesselTree generate_bifurcation(const BifurcationSpec& spec) {
  require_positive(spec.trunk_length, "trunk_length");
  require_positive(spec.child_length, "child_length");
  require_positive(spec.trunk_radius, "trunk_radius");
  require_positive(spec.child_radius, "child_radius");
  const Vec3 split(0.0, spec.trunk_length, 0.0);
  std::vector<BranchDraft> drafts;
  drafts.push_back(make_draft("trunk", std::nullopt, 0.0, {Vec3::Zero(), split},
                              spec.trunk_radius, spec.trunk_radius));
  const Vec3 dl(std::sin(spec.split_angle), std::cos(spec.split_angle), 0.0);
  const Vec3 dr(-std::sin(spec.split_angle), std::cos(spec.split_angle), 0.0);
  drafts.push_back(make_draft("left", "trunk", spec.trunk_length,
                              {split, split + spec.child_length * dl}, spec.child_radius,
                              spec.child_radius));
  drafts.push_back(make_draft("right", "trunk", spec.trunk_length,
                              {split, split + spec.child_length * dr}, spec.child_radius,
                              spec.child_radius));
  return VesselTree::build(std::move(drafts), ArchType::TypeI);
}

VesselTree straight_tube(const Vec3& start, const Vec3& direction, double length,
                         double radius) {
  require_positive(length, "length");
  require_positive(radius, "radius");
  std::vector<BranchDraft> drafts;
  drafts.push_back(make_draft("tube", std::nullopt, 0.0,
                              {start, start + length * direction.normalized()}, radius, radius));
  return VesselTree::build(std::move(drafts), ArchType::TypeI);
}

}  // namespace endonav::vessel
