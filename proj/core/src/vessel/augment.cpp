#include "endonav/vessel/augment.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "endonav/errors.hpp"

namespace endonav::vessel {

AugmentParams draw_augment_params(Rng& rng) {
  AugmentParams p;
  for (int k = 0; k < 3; ++k) p.scale[k] = rng.uniform(kAugmentScaleMin, kAugmentScaleMax);
  p.rot_x = rng.uniform(-kAugmentMaxRotation, kAugmentMaxRotation);
  p.rot_y = rng.uniform(-kAugmentMaxRotation, kAugmentMaxRotation);
  return p;
}

void validate(const AugmentParams& params) {
  for (int k = 0; k < 3; ++k)
    if (!(params.scale[k] >= kAugmentScaleMin && params.scale[k] <= kAugmentScaleMax))
      throw ArgumentError("augmentation scale must lie in [0.7, 1.3]");
  if (!(std::abs(params.rot_x) <= kAugmentMaxRotation) ||
      !(std::abs(params.rot_y) <= kAugmentMaxRotation))
    throw ArgumentError("augmentation rotation must lie within +-30 degrees");
}

Eigen::Matrix3d augment_matrix(const AugmentParams& params) {
  const Eigen::Matrix3d rx = Eigen::AngleAxisd(params.rot_x, Vec3::UnitX()).toRotationMatrix();
  const Eigen::Matrix3d ry = Eigen::AngleAxisd(params.rot_y, Vec3::UnitY()).toRotationMatrix();
  return ry * rx * params.scale.asDiagonal();
}

double radius_scale(const Vec3& scale, const Vec3& tangent) {
  const double det = scale.prod();
  const double stretch = scale.cwiseProduct(tangent).norm();
  return std::sqrt(det / stretch);
}

VesselTree apply_augmentation(const VesselTree& tree, const AugmentParams& params) {
  validate(params);
  const Eigen::Matrix3d m = augment_matrix(params);

  auto drafts = tree.to_drafts();
  const auto& branches = tree.branches();
  for (std::size_t bi = 0; bi < drafts.size(); ++bi) {
    auto& d = drafts[bi];
    const auto& pts = branches[bi].points;
    const std::size_t n = pts.size();
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t lo = k == 0 ? 0 : k - 1;
      const std::size_t hi = k + 1 == n ? n - 1 : k + 1;
      const Vec3 t = (pts[hi].position - pts[lo].position).normalized();
      d.positions[k] = m * pts[k].position;
      d.radii[k] = pts[k].radius * radius_scale(params.scale, t);
    }
  }
  for (std::size_t bi = 0; bi < drafts.size(); ++bi) {
    const auto& att = branches[bi].parent;
    if (!att) continue;
    // Linear maps preserve the fraction along each parent segment.
    const auto& pp = branches[att->parent].points;
    const auto& moved = drafts[att->parent].positions;
    std::size_t seg = 0;
    while (seg + 2 < pp.size() && pp[seg + 1].arc < att->s) ++seg;
    const double f = (att->s - pp[seg].arc) / (pp[seg + 1].arc - pp[seg].arc);
    double arc = 0.0;
    for (std::size_t k = 0; k < seg; ++k) arc += (moved[k + 1] - moved[k]).norm();
    arc += f * (moved[seg + 1] - moved[seg]).norm();
    drafts[bi].parent_s = arc;
  }
  return VesselTree::build(std::move(drafts), tree.arch_type());
}

}  // namespace endonav::vessel
