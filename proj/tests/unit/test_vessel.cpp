#include <doctest.h>

#include <functional>
#include <map>
#include <set>

#include "endonav/errors.hpp"
#include "endonav/vessel/anatomy_io.hpp"
#include "endonav/vessel/augment.hpp"
#include "endonav/vessel/synthetic.hpp"
#include "support/oracles.hpp"

using namespace endonav;
using namespace endonav::vessel;

using testing::enumerate_path_length;
using testing::random_position;
using testing::scan_distance;

TEST_CASE("path_length matches path enumeration on random trees") {
  Rng rng(11);
  for (int t = 0; t < 10; ++t) {
    const auto tree = testing::random_small_tree(rng);
    for (int k = 0; k < 30; ++k) {
      const auto a = random_position(tree, rng);
      const auto b = random_position(tree, rng);
      CHECK(std::abs(tree.path_length(a, b) - enumerate_path_length(tree, a, b)) < 1e-6);
    }
  }
}

TEST_CASE("path_length is a metric along the tree") {
  Rng rng(5);
  const auto tree = testing::random_small_tree(rng);
  for (int k = 0; k < 50; ++k) {
    const auto a = random_position(tree, rng), b = random_position(tree, rng), c = random_position(tree, rng);
    CHECK(tree.path_length(a, a) == doctest::Approx(0.0));
    CHECK(tree.path_length(a, b) == doctest::Approx(tree.path_length(b, a)));
    CHECK(tree.path_length(a, c) <= tree.path_length(a, b) + tree.path_length(b, c) + 1e-9);
  }
}

TEST_CASE("nearest_lumen_point agrees with a fine segment scan") {
  Rng rng(3);
  const auto tree = testing::random_small_tree(rng);
  const auto& box = tree.bounding_box();
  for (int k = 0; k < 200; ++k) {
    const Vec3 p(rng.uniform(box.min.x(), box.max.x()), rng.uniform(box.min.y(), box.max.y()),
                 rng.uniform(box.min.z(), box.max.z()));
    const auto q = tree.nearest_lumen_point(p);
    CHECK(std::abs(q.dist - scan_distance(tree, p)) < 0.01);
    CHECK((q.center - p).norm() == doctest::Approx(q.dist));
    CHECK(q.tangent.norm() == doctest::Approx(1.0));
  }
}

TEST_CASE("resampling keeps spacing and geometry") {
  const auto tree = generate_bifurcation({});
  for (const auto& br : tree.branches())
    for (std::size_t k = 1; k < br.points.size(); ++k)
      CHECK((br.points[k].position - br.points[k - 1].position).norm() <= kMaxPointSpacing + 1e-9);
  CHECK(tree.branch(tree.index_of("trunk")).length() == doctest::Approx(50.0));
}

TEST_CASE("tree validation errors") {
  BranchDraft a{"a", std::nullopt, 0.0, {Vec3(0, 0, 0), Vec3(10, 0, 0)}, {2.0, 2.0}};
  SUBCASE("no branches") { CHECK_THROWS_AS(VesselTree::build({}, ArchType::TypeI), ParseError); }
  SUBCASE("duplicate id") { CHECK_THROWS_AS(VesselTree::build({a, a}, ArchType::TypeI), ParseError); }
  SUBCASE("non-positive radius") {
    auto bad = a;
    bad.radii[1] = 0.0;
    CHECK_THROWS_AS(VesselTree::build({bad}, ArchType::TypeI), ParseError);
  }
  SUBCASE("unknown parent") {
    BranchDraft b{"b", std::string("zz"), 5.0, {Vec3(5, 0, 0), Vec3(5, 10, 0)}, {1.0, 1.0}};
    CHECK_THROWS_AS(VesselTree::build({a, b}, ArchType::TypeI), TopologyError);
  }
  SUBCASE("two roots") {
    BranchDraft b{"b", std::nullopt, 0.0, {Vec3(5, 0, 0), Vec3(5, 10, 0)}, {1.0, 1.0}};
    CHECK_THROWS_AS(VesselTree::build({a, b}, ArchType::TypeI), TopologyError);
  }
  SUBCASE("child starting outside the parent lumen") {
    BranchDraft b{"b", std::string("a"), 5.0, {Vec3(5, 8, 0), Vec3(5, 18, 0)}, {1.0, 1.0}};
    CHECK_THROWS_AS(VesselTree::build({a, b}, ArchType::TypeI), TopologyError);
  }
  SUBCASE("attachment past the parent end") {
    BranchDraft b{"b", std::string("a"), 12.0, {Vec3(10, 0, 0), Vec3(10, 10, 0)}, {1.0, 1.0}};
    CHECK_THROWS_AS(VesselTree::build({a, b}, ArchType::TypeI), ParseError);
  }
}

TEST_CASE("anatomy documents round-trip") {
  const auto tree = *testing::shared_aortic(4, ArchType::TypeII);
  const auto doc = save_tree(tree);
  const auto back = load_tree(doc);
  REQUIRE(back.branches().size() == tree.branches().size());
  CHECK(back.arch_type() == ArchType::TypeII);
  for (std::size_t i = 0; i < tree.branches().size(); ++i) {
    const auto& x = tree.branch(i);
    const auto& y = back.branch(i);
    CHECK(x.id == y.id);
    REQUIRE(x.points.size() == y.points.size());
    for (std::size_t k = 0; k < x.points.size(); ++k) {
      CHECK((x.points[k].position - y.points[k].position).norm() < 1e-12);
      CHECK(x.points[k].radius == y.points[k].radius);
    }
  }
  CHECK(save_tree(back) == doc);
}

TEST_CASE("malformed anatomy documents are rejected") {
  CHECK_THROWS_AS(load_tree("not json"), ParseError);
  CHECK_THROWS_AS(load_tree(R"({"version":"endonav-anatomy/0","arch_type":"I","branches":[]})"), ParseError);
  CHECK_THROWS_AS(load_tree(R"({"version":"endonav-anatomy/1","branches":[]})"), ParseError);
  CHECK_THROWS_AS(load_tree_file("/nonexistent/tree.json"), ParseError);
}

TEST_CASE("synthetic anatomies are deterministic and carry the task branches") {
  const auto a = save_tree(*testing::shared_aortic(9));
  const auto b = save_tree(*testing::shared_aortic(9));
  const auto c = save_tree(*testing::shared_aortic(10));
  CHECK(a == b);
  CHECK(a != c);
  const auto tree = testing::shared_aortic(9);
  for (const char* id : {"aorta", "bct", "rcca", "rica", "lcca", "lica", "lsa"}) CHECK(tree->find(id).has_value());
}

TEST_CASE("augmentation draws stay in range") {
  Rng rng(1);
  for (int k = 0; k < 10000; ++k) {
    const auto p = draw_augment_params(rng);
    for (int i = 0; i < 3; ++i) {
      CHECK(p.scale[i] >= kAugmentScaleMin);
      CHECK(p.scale[i] <= kAugmentScaleMax);
    }
    CHECK(std::abs(p.rot_x) <= kAugmentMaxRotation);
    CHECK(std::abs(p.rot_y) <= kAugmentMaxRotation);
  }
  AugmentParams bad;
  bad.scale.x() = 1.5;
  CHECK_THROWS_AS(validate(bad), ArgumentError);
}

TEST_CASE("uniform scaling multiplies path lengths, rotation preserves distances") {
  const auto tree = *testing::shared_aortic(2);
  Rng rng(8);
  AugmentParams scale;
  scale.scale = Vec3::Constant(1.2);
  const auto scaled = apply_augmentation(tree, scale);
  AugmentParams rot;
  rot.rot_x = 0.3;
  rot.rot_y = -0.4;
  const auto rotated = apply_augmentation(tree, rot);
  for (int k = 0; k < 50; ++k) {
    const auto a = random_position(tree, rng), b = random_position(tree, rng);
    const double d = tree.path_length(a, b);
    const ArcPosition as{a.branch, a.s * 1.2}, bs{b.branch, b.s * 1.2};
    CHECK(std::abs(scaled.path_length(as, bs) - 1.2 * d) <= 1e-6 * std::max(1.0, d));
    const Vec3 p = tree.position_at(a), q = tree.position_at(b);
    CHECK(std::abs((rotated.position_at(a) - rotated.position_at(b)).norm() - (p - q).norm()) < 1e-9);
  }
}

TEST_CASE("lumen projection lands inside and is the identity inside") {
  Rng rng(21);
  const auto tree = testing::random_small_tree(rng);
  const auto& box = tree.bounding_box();
  for (int k = 0; k < 300; ++k) {
    const Vec3 p(rng.uniform(box.min.x(), box.max.x()), rng.uniform(box.min.y(), box.max.y()),
                 rng.uniform(box.min.z(), box.max.z()));
    const double margin = rng.uniform(0.0, 0.5);
    const auto proj = tree.project_into_lumen(p, margin);
    CHECK(tree.inside_lumen(proj.point, margin - 1e-9));
    CHECK((proj.point - p).norm() == doctest::Approx(proj.overshoot));
    const auto q = tree.nearest_lumen_point(p);
    // Inside the nearest tube implies inside the union.
    if (q.dist + margin <= q.radius) {
      CHECK(proj.inside);
      CHECK(proj.point == p);
    }
  }
}
