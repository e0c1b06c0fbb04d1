#pragma once

// Small anatomies and helpers shared by the unit and acceptance tests.

#include <cmath>
#include <memory>
#include <vector>

#include "endonav/rng.hpp"
#include "endonav/vessel/synthetic.hpp"
#include "endonav/vessel/tree.hpp"

namespace endonav::testing {

using vessel::Vec3;

// Random tree of 2..5 branches, each a short polyline attached somewhere on
// an earlier branch. Radii vary linearly along a branch.
inline vessel::VesselTree random_small_tree(Rng& rng) {
  std::vector<vessel::BranchDraft> drafts;
  const int n = 2 + static_cast<int>(rng.below(4));
  std::vector<std::vector<Vec3>> pts;
  for (int b = 0; b < n; ++b) {
    vessel::BranchDraft d;
    d.id = "b" + std::to_string(b);
    Vec3 p;
    if (b == 0) {
      p = Vec3::Zero();
    } else {
      const auto parent = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(b)));
      d.parent_id = "b" + std::to_string(parent);
      // Attach at an interior polyline vertex so the draft point is exact.
      const auto& pp = pts[parent];
      const std::size_t k = 1 + rng.below(pp.size() - 2);
      double s = 0.0;
      for (std::size_t i = 1; i <= k; ++i) s += (pp[i] - pp[i - 1]).norm();
      d.parent_s = s;
      p = pp[k];
    }
    std::vector<Vec3> poly{p};
    Vec3 dir(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    dir.normalize();
    const int segs = 3 + static_cast<int>(rng.below(3));
    for (int s = 0; s < segs; ++s) {
      Vec3 turn(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4));
      dir = (dir + turn).normalized();
      p = p + rng.uniform(3.0, 9.0) * dir;
      poly.push_back(p);
    }
    const double r0 = rng.uniform(1.5, 3.0), r1 = rng.uniform(1.0, 2.5);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      d.positions.push_back(poly[i]);
      d.radii.push_back(r0 + (r1 - r0) * static_cast<double>(i) / static_cast<double>(poly.size() - 1));
    }
    pts.push_back(poly);
    drafts.push_back(std::move(d));
  }
  return vessel::VesselTree::build(std::move(drafts), vessel::ArchType::TypeI);
}

inline std::shared_ptr<const vessel::VesselTree> shared_bifurcation(const vessel::BifurcationSpec& spec = {}) {
  return std::make_shared<const vessel::VesselTree>(vessel::generate_bifurcation(spec));
}

inline std::shared_ptr<const vessel::VesselTree> shared_aortic(std::uint64_t seed,
                                                                vessel::ArchType type = vessel::ArchType::TypeI) {
  vessel::AnatomySpec spec;
  spec.arch_type = type;
  Rng rng(seed);
  return std::make_shared<const vessel::VesselTree>(vessel::generate_synthetic_anatomy(spec, rng));
}

// Closest point of segment [a, b] to p, by sampling every `step` mm.
inline double scan_segment(const Vec3& a, const Vec3& b, const Vec3& p, double step, double* t_best = nullptr) {
  const double len = (b - a).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  double best = 1e300;
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    const double d = (a + t * (b - a) - p).norm();
    if (d < best) {
      best = d;
      if (t_best) *t_best = t;
    }
  }
  return best;
}

}  // namespace endonav::testing
