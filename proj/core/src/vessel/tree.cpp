#include "endonav/vessel/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>

#include "endonav/errors.hpp"

namespace endonav::vessel {
namespace {

constexpr double kSpacingSlack = 1e-9;

std::string point_label(const std::string& branch, std::size_t i) {
  return "branch '" + branch + "' point " + std::to_string(i);
}

bool finite(const Vec3& v) { return v.allFinite(); }

// Splits every segment longer than kMaxPointSpacing into equal pieces. Existing
// points are kept, so resampling an already resampled branch is a no-op.
void resample(BranchDraft& draft) {
  std::vector<Vec3> pos;
  std::vector<double> rad;
  pos.reserve(draft.positions.size());
  rad.reserve(draft.radii.size());
  for (std::size_t i = 0; i + 1 < draft.positions.size(); ++i) {
    const Vec3& a = draft.positions[i];
    const Vec3& b = draft.positions[i + 1];
    pos.push_back(a);
    rad.push_back(draft.radii[i]);
    const double len = (b - a).norm();
    if (len > kMaxPointSpacing + kSpacingSlack) {
      const auto pieces =
          static_cast<std::size_t>(std::ceil(len / kMaxPointSpacing - kSpacingSlack));
      for (std::size_t k = 1; k < pieces; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(pieces);
        pos.push_back(a + f * (b - a));
        rad.push_back(draft.radii[i] + f * (draft.radii[i + 1] - draft.radii[i]));
      }
    }
  }
  pos.push_back(draft.positions.back());
  rad.push_back(draft.radii.back());
  draft.positions = std::move(pos);
  draft.radii = std::move(rad);
}

}  // namespace

Aabb compute_bounding_box(const std::vector<Branch>& branches) {
  Aabb box;
  const double inf = std::numeric_limits<double>::infinity();
  box.min = Vec3::Constant(inf);
  box.max = Vec3::Constant(-inf);
  for (const auto& b : branches) {
    for (const auto& p : b.points) {
      const Vec3 r = Vec3::Constant(p.radius);
      box.min = box.min.cwiseMin(p.position - r);
      box.max = box.max.cwiseMax(p.position + r);
    }
  }
  return box;
}

VesselTree VesselTree::build(std::vector<BranchDraft> drafts, ArchType arch_type) {
  if (drafts.empty()) throw ParseError("anatomy has no branches");

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    const auto& d = drafts[i];
    if (d.id.empty()) throw ParseError("branch " + std::to_string(i) + " has an empty id");
    if (!index.emplace(d.id, i).second) throw ParseError("duplicate branch id '" + d.id + "'");
    if (d.positions.size() != d.radii.size())
      throw ParseError("branch '" + d.id + "' has mismatched position/radius counts");
    if (d.positions.size() < 2)
      throw ParseError("branch '" + d.id + "' needs at least 2 points");
    for (std::size_t k = 0; k < d.positions.size(); ++k) {
      if (!finite(d.positions[k]))
        throw ParseError(point_label(d.id, k) + ": non-finite coordinate");
      if (!(d.radii[k] > 0.0) || !std::isfinite(d.radii[k]))
        throw ParseError(point_label(d.id, k) + ": radius must be > 0");
      if (k > 0 && !((d.positions[k] - d.positions[k - 1]).norm() > 0.0))
        throw ParseError(point_label(d.id, k) + ": duplicate of previous point");
    }
  }

  // Topology: one root, every parent exists, no cycles.
  std::optional<std::size_t> root;
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    const auto& d = drafts[i];
    if (!d.parent_id) {
      if (root) throw TopologyError("branches '" + drafts[*root].id + "' and '" + d.id +
                                    "' both lack a parent");
      root = i;
    } else if (!index.contains(*d.parent_id)) {
      throw TopologyError("branch '" + d.id + "' references unknown parent '" +
                          *d.parent_id + "'");
    }
  }
  if (!root) throw TopologyError("anatomy has no root branch");
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    std::size_t cur = i;
    std::size_t hops = 0;
    while (drafts[cur].parent_id) {
      cur = index.at(*drafts[cur].parent_id);
      if (++hops > drafts.size())
        throw TopologyError("branch '" + drafts[i].id + "' is not connected to the root");
    }
  }

  VesselTree tree;
  tree.arch_type_ = arch_type;
  tree.root_ = *root;
  tree.branches_.resize(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    resample(drafts[i]);
    Branch& b = tree.branches_[i];
    b.id = drafts[i].id;
    b.points.resize(drafts[i].positions.size());
    double arc = 0.0;
    for (std::size_t k = 0; k < b.points.size(); ++k) {
      if (k > 0) arc += (drafts[i].positions[k] - drafts[i].positions[k - 1]).norm();
      b.points[k] = {drafts[i].positions[k], drafts[i].radii[k], arc};
    }
  }
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    if (!drafts[i].parent_id) continue;
    const std::size_t parent = index.at(*drafts[i].parent_id);
    const double parent_len = tree.branches_[parent].length();
    double s = drafts[i].parent_s;
    // Absorb round-off from resampling or re-derived arc coordinates.
    if (s < 0.0 && s > -1e-9) s = 0.0;
    if (s > parent_len && s < parent_len + 1e-9) s = parent_len;
    if (!(s >= 0.0 && s <= parent_len))
      throw ParseError("branch '" + drafts[i].id + "': attachment s=" + std::to_string(s) +
                       " outside parent '" + drafts[parent].id + "' extent");
    tree.branches_[i].parent = Attachment{parent, s};
  }
  tree.finalize();

  for (std::size_t i = 0; i < tree.branches_.size(); ++i) {
    const auto& b = tree.branches_[i];
    if (!b.parent) continue;
    const ArcPosition at{b.parent->parent, b.parent->s};
    const double gap = (b.points.front().position - tree.position_at(at)).norm();
    if (gap > tree.radius_at(at))
      throw TopologyError("branch '" + b.id + "' starts outside the lumen of '" +
                          tree.branches_[b.parent->parent].id + "'");
  }
  return tree;
}

void VesselTree::finalize() {
  bbox_ = compute_bounding_box(branches_);

  segments_.clear();
  for (std::size_t bi = 0; bi < branches_.size(); ++bi) {
    const auto& pts = branches_[bi].points;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      Segment seg;
      seg.a = pts[k].position;
      seg.d = pts[k + 1].position - pts[k].position;
      seg.len2 = seg.d.squaredNorm();
      seg.len = pts[k + 1].arc - pts[k].arc;
      seg.s0 = pts[k].arc;
      seg.r0 = pts[k].radius;
      seg.r1 = pts[k + 1].radius;
      seg.branch = bi;
      segments_.push_back(seg);
    }
  }

  // Stations: both branch ends plus every child attachment.
  std::vector<std::vector<double>> arcs(branches_.size());
  for (std::size_t bi = 0; bi < branches_.size(); ++bi) {
    arcs[bi].push_back(0.0);
    arcs[bi].push_back(branches_[bi].length());
  }
  for (const auto& b : branches_)
    if (b.parent) arcs[b.parent->parent].push_back(b.parent->s);

  stations_.clear();
  branch_stations_.assign(branches_.size(), {});
  for (std::size_t bi = 0; bi < branches_.size(); ++bi) {
    auto& a = arcs[bi];
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    for (double s : a) {
      branch_stations_[bi].push_back(stations_.size());
      stations_.push_back({bi, s});
    }
  }

  const std::size_t n = stations_.size();
  const double inf = std::numeric_limits<double>::infinity();
  station_dist_.assign(n * n, inf);
  auto link = [&](std::size_t u, std::size_t v, double w) {
    station_dist_[u * n + v] = std::min(station_dist_[u * n + v], w);
    station_dist_[v * n + u] = std::min(station_dist_[v * n + u], w);
  };
  for (std::size_t u = 0; u < n; ++u) station_dist_[u * n + u] = 0.0;
  for (const auto& ids : branch_stations_)
    for (std::size_t k = 0; k + 1 < ids.size(); ++k)
      link(ids[k], ids[k + 1], stations_[ids[k + 1]].s - stations_[ids[k]].s);
  for (std::size_t bi = 0; bi < branches_.size(); ++bi) {
    const auto& b = branches_[bi];
    if (!b.parent) continue;
    const auto& ps = branch_stations_[b.parent->parent];
    const auto it = std::find_if(ps.begin(), ps.end(),
                                 [&](std::size_t id) { return stations_[id].s == b.parent->s; });
    const ArcPosition at{b.parent->parent, b.parent->s};
    const double offset = (b.points.front().position - position_at(at)).norm();
    link(branch_stations_[bi].front(), *it, offset);
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      const double dik = station_dist_[i * n + k];
      if (dik == inf) continue;
      for (std::size_t j = 0; j < n; ++j) {
        const double cand = dik + station_dist_[k * n + j];
        if (cand < station_dist_[i * n + j]) station_dist_[i * n + j] = cand;
      }
    }
}

std::optional<std::size_t> VesselTree::find(std::string_view id) const {
  for (std::size_t i = 0; i < branches_.size(); ++i)
    if (branches_[i].id == id) return i;
  return std::nullopt;
}

std::size_t VesselTree::index_of(std::string_view id) const {
  if (auto i = find(id)) return *i;
  throw ArgumentError("unknown branch id '" + std::string(id) + "'");
}

std::size_t VesselTree::locate_segment(std::size_t branch, double s) const {
  const auto& pts = branches_.at(branch).points;
  const auto it = std::upper_bound(pts.begin(), pts.end(), s,
                                   [](double v, const CenterlinePoint& p) { return v < p.arc; });
  std::size_t k = static_cast<std::size_t>(std::distance(pts.begin(), it));
  if (k == 0) return 0;
  return std::min(k - 1, pts.size() - 2);
}

Vec3 VesselTree::position_at(ArcPosition at) const {
  const auto& pts = branches_.at(at.branch).points;
  const double s = std::clamp(at.s, 0.0, pts.back().arc);
  const std::size_t k = locate_segment(at.branch, s);
  const double f = (s - pts[k].arc) / (pts[k + 1].arc - pts[k].arc);
  return pts[k].position + f * (pts[k + 1].position - pts[k].position);
}

double VesselTree::radius_at(ArcPosition at) const {
  const auto& pts = branches_.at(at.branch).points;
  const double s = std::clamp(at.s, 0.0, pts.back().arc);
  const std::size_t k = locate_segment(at.branch, s);
  const double f = (s - pts[k].arc) / (pts[k + 1].arc - pts[k].arc);
  return pts[k].radius + f * (pts[k + 1].radius - pts[k].radius);
}

Vec3 VesselTree::tangent_at(ArcPosition at) const {
  const auto& pts = branches_.at(at.branch).points;
  const double s = std::clamp(at.s, 0.0, pts.back().arc);
  const std::size_t k = locate_segment(at.branch, s);
  return (pts[k + 1].position - pts[k].position).normalized();
}

LumenQuery VesselTree::nearest_lumen_point(const Vec3& p) const {
  double best = std::numeric_limits<double>::infinity();
  const Segment* best_seg = nullptr;
  double best_t = 0.0;
  for (const auto& seg : segments_) {
    const Vec3 w = p - seg.a;
    double t = w.dot(seg.d) / seg.len2;
    t = std::clamp(t, 0.0, 1.0);
    const double d2 = (w - t * seg.d).squaredNorm();
    if (d2 < best) {
      best = d2;
      best_seg = &seg;
      best_t = t;
    }
  }
  LumenQuery q;
  q.position = {best_seg->branch, best_seg->s0 + best_t * best_seg->len};
  q.dist = std::sqrt(best);
  q.tangent = best_seg->d / std::sqrt(best_seg->len2);
  q.radius = best_seg->r0 + best_t * (best_seg->r1 - best_seg->r0);
  q.center = best_seg->a + best_t * best_seg->d;
  return q;
}

bool VesselTree::inside_lumen(const Vec3& p, double margin) const {
  return project_into_lumen(p, margin).inside;
}

LumenProjection VesselTree::project_into_lumen(const Vec3& p, double margin) const {
  LumenProjection best;
  best.overshoot = std::numeric_limits<double>::infinity();
  best.inside = false;
  for (const auto& seg : segments_) {
    const Vec3 w = p - seg.a;
    const double t = std::clamp(w.dot(seg.d) / seg.len2, 0.0, 1.0);
    const Vec3 c = seg.a + t * seg.d;
    const double allowed = std::max(0.0, seg.r0 + t * (seg.r1 - seg.r0) - margin);
    const double dist = (p - c).norm();
    if (dist <= allowed) return {p, c, 0.0, true};
    if (dist - allowed < best.overshoot) {
      best.overshoot = dist - allowed;
      best.center = c;
      best.point = c + (p - c) * (allowed / dist);
    }
  }
  return best;
}

std::pair<std::size_t, std::size_t> VesselTree::bracket(std::size_t branch, double s) const {
  const auto& ids = branch_stations_.at(branch);
  std::size_t lo = ids.front();
  std::size_t hi = ids.back();
  for (std::size_t id : ids) {
    if (stations_[id].s <= s) lo = id;
    if (stations_[id].s >= s) {
      hi = id;
      break;
    }
  }
  return {lo, hi};
}

double VesselTree::path_length(ArcPosition a, ArcPosition b) const {
  const std::size_t n = stations_.size();
  double best = std::numeric_limits<double>::infinity();
  if (a.branch == b.branch) best = std::abs(a.s - b.s);
  const auto [a0, a1] = bracket(a.branch, a.s);
  const auto [b0, b1] = bracket(b.branch, b.s);
  for (std::size_t na : {a0, a1})
    for (std::size_t nb : {b0, b1}) {
      const double cand = std::abs(a.s - stations_[na].s) + station_dist_[na * n + nb] +
                          std::abs(b.s - stations_[nb].s);
      best = std::min(best, cand);
    }
  return best;
}

Vec3 VesselTree::sample_point_in_region(const Region& region, Rng& rng, double margin) const {
  return sample_region(region, rng, margin).point;
}

RegionSample VesselTree::sample_region(const Region& region, Rng& rng, double margin) const {
  if (region.s_min > region.s_max)
    throw ArgumentError("empty region on '" + region.branch + "': s_min > s_max");
  const std::size_t bi = index_of(region.branch);
  const double len = branches_[bi].length();
  if (region.s_min < 0.0 || region.s_max > len)
    throw ArgumentError("region on '" + region.branch + "' exceeds branch extent");

  const double s = rng.uniform(region.s_min, region.s_max);
  const ArcPosition at{bi, s};
  const Vec3 c = position_at(at);
  const Vec3 t = tangent_at(at);
  const double r = std::max(0.0, radius_at(at) - margin);
  // Orthonormal frame of the cross-section disc.
  const Vec3 helper = std::abs(t.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = t.cross(helper).normalized();
  const Vec3 v = t.cross(u);
  // Rejection keeps the sample inside the lumen as seen by the nearest-point
  // query, which differs from the disc near junctions and tapering.
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double rho = r * std::sqrt(rng.uniform());
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    const Vec3 p = c + rho * (std::cos(theta) * u + std::sin(theta) * v);
    if (inside_lumen(p, margin)) return {p, at};
  }
  return {c, at};
}

std::vector<BranchDraft> VesselTree::to_drafts() const {
  std::vector<BranchDraft> drafts;
  drafts.reserve(branches_.size());
  for (const auto& b : branches_) {
    BranchDraft d;
    d.id = b.id;
    if (b.parent) {
      d.parent_id = branches_[b.parent->parent].id;
      d.parent_s = b.parent->s;
    }
    for (const auto& p : b.points) {
      d.positions.push_back(p.position);
      d.radii.push_back(p.radius);
    }
    drafts.push_back(std::move(d));
  }
  return drafts;
}

}  // namespace endonav::vessel
