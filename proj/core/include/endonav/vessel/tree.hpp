#pragma once

// Rigid vascular anatomy: a tree of piecewise-linear centerlines with a
// linearly interpolated lumen radius. All lengths are millimetres.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "endonav/rng.hpp"

namespace endonav::vessel {

using Vec3 = Eigen::Vector3d;

// Maximum distance between consecutive centerline points after resampling.
inline constexpr double kMaxPointSpacing = 2.0;

struct CenterlinePoint {
  Vec3 position = Vec3::Zero();
  double radius = 0.0;
  double arc = 0.0;  // cumulative arc length from the branch start
};

struct Attachment {
  std::size_t parent = 0;  // index into VesselTree::branches()
  double s = 0.0;          // arc coordinate on the parent
};

struct Branch {
  std::string id;
  std::vector<CenterlinePoint> points;
  std::optional<Attachment> parent;

  double length() const { return points.back().arc; }
};

enum class ArchType { TypeI, TypeII };

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};

struct ArcPosition {
  std::size_t branch = 0;
  double s = 0.0;

  friend bool operator==(const ArcPosition&, const ArcPosition&) = default;
};

struct LumenQuery {
  ArcPosition position;
  double dist = 0.0;
  Vec3 tangent = Vec3::UnitX();
  double radius = 0.0;
  Vec3 center = Vec3::Zero();  // closest centerline point
};

// Arc interval on a named branch (task start / target areas).
struct Region {
  std::string branch;
  double s_min = 0.0;
  double s_max = 0.0;
};

// Closest admissible point of the lumen shrunk by a margin. The lumen is the
// union of the per-segment tubes, so junctions have no inner ledges.
struct LumenProjection {
  Vec3 point = Vec3::Zero();
  Vec3 center = Vec3::Zero();  // centerline point of the tube that admits `point`
  double overshoot = 0.0;      // distance from the query to `point`
  bool inside = true;
};

struct RegionSample {
  Vec3 point = Vec3::Zero();
  ArcPosition at;  // centerline station the sample was drawn around
};

// Unvalidated branch description as authored in a file or by the generator.
struct BranchDraft {
  std::string id;
  std::optional<std::string> parent_id;
  double parent_s = 0.0;
  std::vector<Vec3> positions;
  std::vector<double> radii;
};

class VesselTree {
 public:
  // Validates the drafts, resamples every branch to kMaxPointSpacing and
  // precomputes the junction graph. Throws ParseError / TopologyError.
  static VesselTree build(std::vector<BranchDraft> drafts, ArchType arch_type);

  const std::vector<Branch>& branches() const { return branches_; }
  const Branch& branch(std::size_t index) const { return branches_.at(index); }
  std::size_t root() const { return root_; }
  const Aabb& bounding_box() const { return bbox_; }
  ArchType arch_type() const { return arch_type_; }

  std::optional<std::size_t> find(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;  // throws ArgumentError

  // Interpolated centerline quantities; s is clamped to the branch extent.
  Vec3 position_at(ArcPosition at) const;
  double radius_at(ArcPosition at) const;
  Vec3 tangent_at(ArcPosition at) const;

  LumenQuery nearest_lumen_point(const Vec3& p) const;
  // Union-of-tubes containment and projection.
  bool inside_lumen(const Vec3& p, double margin = 0.0) const;
  LumenProjection project_into_lumen(const Vec3& p, double margin = 0.0) const;

  double path_length(ArcPosition a, ArcPosition b) const;

  // Uniform s in the region, then a uniform point in the lumen disc
  // perpendicular to the local tangent, shrunk by `margin`.
  Vec3 sample_point_in_region(const Region& region, Rng& rng, double margin = 0.0) const;
  RegionSample sample_region(const Region& region, Rng& rng, double margin = 0.0) const;

  // Drafts reproducing this tree exactly (resampled points included).
  std::vector<BranchDraft> to_drafts() const;

 private:
  struct Segment {
    Vec3 a;
    Vec3 d;  // b - a
    double len2;
    double len;
    double s0;
    double r0;
    double r1;
    std::size_t branch;
  };

  // Graph nodes are (branch, arc) stations: branch ends and junctions.
  struct Station {
    std::size_t branch;
    double s;
  };

  void finalize();
  std::size_t locate_segment(std::size_t branch, double s) const;
  // Indices of the stations bracketing s on the branch (possibly equal).
  std::pair<std::size_t, std::size_t> bracket(std::size_t branch, double s) const;

  std::vector<Branch> branches_;
  std::size_t root_ = 0;
  Aabb bbox_;
  ArchType arch_type_ = ArchType::TypeI;

  std::vector<Segment> segments_;
  std::vector<Station> stations_;
  std::vector<std::vector<std::size_t>> branch_stations_;  // sorted by s
  std::vector<double> station_dist_;                       // all pairs, row-major
};

// Bounding box of a tree's points inflated by radius, as the tree stores it.
Aabb compute_bounding_box(const std::vector<Branch>& branches);

}  // namespace endonav::vessel
