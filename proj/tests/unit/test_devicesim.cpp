#include <doctest.h>

#include "endonav/devicesim/device_sim.hpp"
#include "endonav/errors.hpp"
#include "endonav/vessel/synthetic.hpp"
#include "support/fixtures.hpp"

using namespace endonav;
using namespace endonav::sim;

namespace {

struct Start {
  Vec3 point;
  Vec3 heading;
};

Start trunk_start(const VesselTree& tree) {
  const vessel::ArcPosition at{tree.index_of("trunk"), 5.0};
  return {tree.position_at(at), tree.tangent_at(at)};
}

DeviceCommand random_command(Rng& rng) {
  return {rng.uniform(-60, 80), rng.uniform(-5, 5), rng.uniform(-60, 80), rng.uniform(-5, 5)};
}

}  // namespace

TEST_CASE("device presets") {
  const auto gw = DeviceParams::guidewire();
  const auto c = DeviceParams::catheter();
  CHECK(gw.outer_diameter == doctest::Approx(0.889));
  CHECK(c.outer_diameter == doctest::Approx(1.12014));
  CHECK(c.tip_bend_angle == 0.0);
  CHECK(gw.max_translation_speed == 40.0);
  CHECK(gw.max_rotation_speed == doctest::Approx(std::numbers::pi));
  CHECK_NOTHROW(validate(gw));
  auto bad = gw;
  bad.max_translation_speed = 50.0;
  CHECK_THROWS_AS(validate(bad), ArgumentError);
  bad = gw;
  bad.outer_diameter = 0.0;
  CHECK_THROWS_AS(validate(bad), ArgumentError);
}

TEST_CASE("bend direction is a unit normal rotated by roll") {
  Rng rng(2);
  for (int k = 0; k < 100; ++k) {
    const Vec3 h = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const double roll = rng.uniform(-7, 7);
    const Vec3 b = bend_direction(h, roll);
    CHECK(b.norm() == doctest::Approx(1.0));
    CHECK(std::abs(b.dot(h)) < 1e-12);
    CHECK(bend_direction(h, roll + 2 * std::numbers::pi).isApprox(b, 1e-12));
    CHECK(std::abs(bend_direction(h, roll + std::numbers::pi / 2).dot(b)) < 1e-12);
  }
  CHECK(std::abs(bend_direction(Vec3::UnitZ(), 0.0).dot(Vec3::UnitX()) - 1.0) < 1e-12);
}

TEST_CASE("reset protrudes the guidewire and rejects points outside the lumen") {
  const auto tree = *testing::shared_bifurcation();
  const auto s = trunk_start(tree);
  const auto placed = reset_devices(tree, s.point, s.heading);
  CHECK(placed.state.guidewire.insertion_length == doctest::Approx(kInitialProtrusion));
  CHECK(placed.state.catheter.insertion_length == 0.0);
  CHECK((placed.outcome.tracking_points[0] - s.point).norm() == doctest::Approx(kInitialProtrusion));
  CHECK_THROWS_AS(reset_devices(tree, s.point + Vec3(0, 0, 50), s.heading), PlacementError);
  CHECK_THROWS_AS(reset_devices(tree, s.point, Vec3::Zero()), ArgumentError);
}

TEST_CASE("speed cap, containment and contact force law over random episodes") {
  const auto tree = *testing::shared_bifurcation();
  const auto s = trunk_start(tree);
  const SimParams params;
  Rng rng(17);
  std::size_t contacts = 0;
  for (int ep = 0; ep < 40; ++ep) {
    auto st = reset_devices(tree, s.point, s.heading).state;
    for (int t = 0; t < 100; ++t) {
      const auto out = sim_step(st, tree, random_command(rng), kControlPeriod, params);
      CHECK(out.tip_displacement <= kMaxTranslationSpeed * kControlPeriod * 1.01);
      for (const auto& c : out.contacts) {
        ++contacts;
        CHECK(c.force.norm() == doctest::Approx(params.guidewire.wall_stiffness * c.penetration).epsilon(1e-12));
        CHECK(tip_force_norm(out.contacts) >= c.force.norm());
      }
      CHECK(tree.inside_lumen(st.tip_position(Device::Guidewire)));
      CHECK(st.catheter.insertion_length <= st.trace_length() + 1e-12);
      CHECK(st.guidewire.insertion_length <= st.trace_length() + 1e-12);
    }
    for (const auto& p : st.trace) CHECK(tree.inside_lumen(p, -1e-9));
  }
  CHECK(contacts > 0);
}

TEST_CASE("advance then retract returns the tip to its start") {
  const auto tree = *testing::shared_bifurcation();
  const auto s = trunk_start(tree);
  auto st = reset_devices(tree, s.point, s.heading).state;
  const Vec3 start = st.tip_position(Device::Guidewire);
  for (int t = 0; t < 8; ++t) sim_step(st, tree, {30.0, 1.0, 0.0, 0.0}, kControlPeriod);
  CHECK((st.tip_position(Device::Guidewire) - start).norm() > 10.0);
  for (int t = 0; t < 8; ++t) sim_step(st, tree, {-30.0, -1.0, 0.0, 0.0}, kControlPeriod);
  CHECK((st.tip_position(Device::Guidewire) - start).norm() < 0.1);
}

TEST_CASE("the catheter follows the guidewire path") {
  const auto tree = *testing::shared_bifurcation();
  const auto s = trunk_start(tree);
  auto st = reset_devices(tree, s.point, s.heading).state;
  for (int t = 0; t < 6; ++t) sim_step(st, tree, {35.0, 2.0, 0.0, 0.0}, kControlPeriod);
  const auto gw_path = st.traced_path(Device::Guidewire);
  for (int t = 0; t < 4; ++t) sim_step(st, tree, {0.0, 0.0, 30.0, 0.0}, kControlPeriod);
  CHECK(st.leader() == Device::Guidewire);
  // The catheter tip sits on the polyline the guidewire traced.
  const Vec3 c = st.tip_position(Device::Catheter);
  double best = 1e300;
  for (std::size_t k = 1; k < gw_path.size(); ++k) best = std::min(best, testing::scan_segment(gw_path[k - 1], gw_path[k], c, 1e-3));
  CHECK(best < 1e-3);
}

TEST_CASE("the catheter leads when pushed past the guidewire") {
  const auto tree = *testing::shared_bifurcation();
  const auto s = trunk_start(tree);
  auto st = reset_devices(tree, s.point, s.heading).state;
  for (int t = 0; t < 5; ++t) sim_step(st, tree, {0.0, 0.0, 30.0, 0.0}, kControlPeriod);
  CHECK(st.leader() == Device::Catheter);
  CHECK(st.catheter.insertion_length == doctest::Approx(st.trace_length()));
  CHECK(st.guidewire.insertion_length == doctest::Approx(kInitialProtrusion));
}

TEST_CASE("simulation is deterministic") {
  const auto tree = *testing::shared_bifurcation();
  const auto s = trunk_start(tree);
  auto a = reset_devices(tree, s.point, s.heading).state;
  auto b = a;
  Rng r1(4), r2(4);
  for (int t = 0; t < 60; ++t) {
    sim_step(a, tree, random_command(r1), kControlPeriod);
    sim_step(b, tree, random_command(r2), kControlPeriod);
  }
  CHECK(a == b);
}
