#include <doctest.h>

#include "endonav/env/nav_env.hpp"
#include "endonav/errors.hpp"
#include "support/fixtures.hpp"

using namespace endonav;
using namespace endonav::env;

namespace {

// Written out independently of the library constants.
double reward_oracle(double delta_mm, bool reached) { return -0.00015 - 0.001 * delta_mm + (reached ? 1.0 : 0.0); }

Action random_action(Rng& rng) { return {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}; }

}  // namespace

TEST_CASE("reward table") {
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const double delta = rng.uniform(-6.0, 6.0);
    const bool reached = k % 4 == 0;
    CHECK(std::abs(compute_reward(delta, reached) - reward_oracle(delta, reached)) < 1e-12);
  }
  CHECK(compute_reward(0.0, false) == doctest::Approx(-0.00015));
  CHECK(compute_reward(-10.0, true) == doctest::Approx(1.0 - 0.00015 + 0.01));
}

TEST_CASE("observation layout") {
  Observation o;
  for (int k = 0; k < 3; ++k) {
    o.tracking_now[k] = Vec2(k, 10 + k);
    o.tracking_prev[k] = Vec2(20 + k, 30 + k);
  }
  o.target = Vec2(40, 41);
  o.prev_action = {0.1, 0.2, 0.3, 0.4};
  const auto v = o.flatten();
  REQUIRE(v.size() == 18);
  CHECK(v[0] == 0);
  CHECK(v[1] == 10);
  CHECK(v[4] == 2);
  CHECK(v[6] == 20);
  CHECK(v[11] == 32);
  CHECK(v[12] == 40);
  CHECK(v[13] == 41);
  CHECK(v[14] == 0.1);
  CHECK(v[17] == 0.4);
}

TEST_CASE("normalizer maps the projected box onto [-1, 1] and clamps") {
  vessel::Aabb box{Vec3(-10, 0, -3), Vec3(30, 20, 3)};
  Normalizer n(box);
  CHECK(n.normalize(Vec2(-10, 0)).isApprox(Vec2(-1, -1)));
  CHECK(n.normalize(Vec2(30, 20)).isApprox(Vec2(1, 1)));
  CHECK(n.normalize(Vec2(10, 10)).isApprox(Vec2(0, 0)));
  CHECK(n.normalize(Vec2(100, -100)).isApprox(Vec2(1, -1)));
  CHECK(n.denormalize(n.normalize(Vec2(3, 7))).isApprox(Vec2(3, 7)));
  CHECK(project_fluoro(Vec3(1, 2, 3)) == Vec2(1, 2));
  CHECK_THROWS_AS(Normalizer(vessel::Aabb{Vec3(0, 0, 0), Vec3(0, 5, 5)}), NormalizationError);
}

TEST_CASE("action clamping and scaling") {
  const auto c = clamp_action({2.0, -3.0, std::nan(""), 0.5});
  CHECK(c == Action{1.0, -1.0, 0.0, 0.5});
  const auto cmd = scale_action({0.5, -1.0, 1.0, 0.0});
  CHECK(cmd[0] == doctest::Approx(20.0));
  CHECK(cmd[1] == doctest::Approx(-std::numbers::pi));
  CHECK(cmd[2] == doctest::Approx(40.0));
  CHECK(cmd[3] == 0.0);
}

TEST_CASE("lifecycle") {
  NavEnv e(testing::shared_bifurcation(), {});
  CHECK_THROWS_AS(e.step({}), LifecycleError);
  EpisodeConfig cfg;
  cfg.max_steps = 3;
  NavEnv short_env(testing::shared_bifurcation(), cfg);
  Rng rng(2);
  short_env.reset(bifurcation_task(TaskId::A1), rng);
  StepResult r;
  for (int t = 0; t < 3; ++t) {
    CHECK(short_env.active());
    r = short_env.step({0.0, 0.0, 0.0, 0.0});
  }
  CHECK(r.truncated);
  CHECK_FALSE(r.terminated);
  CHECK(r.info.step_index == 3);
  CHECK_THROWS_AS(short_env.step({}), LifecycleError);
}

TEST_CASE("reaching the target terminates with the success bonus") {
  EpisodeConfig cfg;
  cfg.success_radius = 500.0;
  NavEnv e(testing::shared_bifurcation(), cfg);
  Rng rng(3);
  e.reset(bifurcation_task(TaskId::A1), rng);
  const auto r = e.step({0.2, 0.0, 0.0, 0.0});
  CHECK(r.terminated);
  CHECK_FALSE(r.truncated);
  CHECK(r.info.reached);
  CHECK(r.reward == doctest::Approx(reward_oracle(r.info.delta_pathlength, true)));
}

TEST_CASE("rewards telescope over an episode") {
  NavEnv e(testing::shared_bifurcation(), {});
  Rng rng(4);
  for (int ep = 0; ep < 10; ++ep) {
    e.reset(bifurcation_task(TaskId::A1, ep % 2 == 0), rng);
    const double initial = e.pathlength();
    double sum = 0.0;
    std::size_t steps = 0;
    bool reached = false, done = false;
    while (!done) {
      const auto r = e.step(random_action(rng));
      sum += r.reward;
      ++steps;
      reached = r.terminated;
      done = r.terminated || r.truncated;
    }
    const double expected = -0.00015 * steps - 0.001 * (e.pathlength() - initial) + (reached ? 1.0 : 0.0);
    CHECK(std::abs(sum - expected) < 1e-9);
  }
}

TEST_CASE("observations carry the previous tracking points and action") {
  NavEnv e(testing::shared_bifurcation(), {});
  Rng rng(5);
  auto obs = e.reset(bifurcation_task(TaskId::A1), rng);
  CHECK(obs.tracking_prev == obs.tracking_now);
  CHECK(obs.prev_action == Action{});
  for (int t = 0; t < 10; ++t) {
    const Action a{1.5, 0.3, -0.2, 0.1};
    const auto r = e.step(a);
    CHECK(r.obs.tracking_prev == obs.tracking_now);
    CHECK(r.obs.prev_action == clamp_action(a));
    CHECK(r.obs.target == obs.target);
    for (int i = 0; i < 18; ++i) CHECK(std::abs(r.obs.flatten()[i]) <= 1.0);
    obs = r.obs;
  }
}

TEST_CASE("episodes are deterministic per rng seed") {
  NavEnv a(testing::shared_aortic(1), {});
  NavEnv b(testing::shared_aortic(1), {});
  const auto task = resolve_task(TaskId::A2L, a.base_tree());
  Rng ra(6), rb(6);
  CHECK(a.reset(task, ra) == b.reset(task, rb));
  for (int t = 0; t < 30; ++t) {
    const Action act = random_action(ra);
    random_action(rb);
    const auto x = a.step(act), y = b.step(act);
    CHECK(x.obs == y.obs);
    CHECK(x.reward == y.reward);
  }
}

TEST_CASE("augmented episodes stay within the augmentation law") {
  EpisodeConfig cfg;
  cfg.augment = true;
  NavEnv e(testing::shared_aortic(2), cfg);
  const auto task = resolve_task(TaskId::A1, e.base_tree());
  Rng rng(7);
  for (int k = 0; k < 10; ++k) {
    e.reset(task, rng);
    REQUIRE(e.augment_params().has_value());
    CHECK_NOTHROW(vessel::validate(*e.augment_params()));
    const auto& t = e.episode_task().target;
    const auto at = e.target_arc();
    CHECK(e.episode_tree().branch(at.branch).id == t.branch);
    CHECK(at.s >= t.s_min - 1e-9);
    CHECK(at.s <= t.s_max + 1e-9);
  }
}

TEST_CASE("tasks") {
  const auto tree = testing::shared_aortic(3);
  for (auto id : kAllTasks) {
    CHECK(task_from_string(to_string(id)) == id);
    const auto t = resolve_task(id, *tree);
    CHECK(t.id == id);
    CHECK_NOTHROW(validate_task(t, *tree));
  }
  CHECK(resolve_task(TaskId::A3R, *tree).target.branch == "rica");
  CHECK(resolve_task(TaskId::A2L, *tree).target.branch == "lcca");
  CHECK_THROWS_AS(task_from_string("A4"), ArgumentError);
  CHECK_THROWS_AS(resolve_task(TaskId::A1, *testing::shared_bifurcation()), ResetError);
  auto bad = bifurcation_task(TaskId::A1);
  bad.target.s_max = 500.0;
  CHECK_THROWS_AS(validate_task(bad, *testing::shared_bifurcation()), ResetError);
}

TEST_CASE("map_task rescales regions by branch length") {
  const auto base = testing::shared_bifurcation();
  vessel::AugmentParams p;
  p.scale = Vec3::Constant(1.25);
  const auto scaled = vessel::apply_augmentation(*base, p);
  const auto m = map_task(bifurcation_task(TaskId::A1), *base, scaled);
  CHECK(m.start.s_min == doctest::Approx(5.0 * 1.25));
  CHECK(m.target.s_max == doctest::Approx(45.0 * 1.25));
}
