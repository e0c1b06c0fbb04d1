// Micro benchmarks of the hot paths of a training step.

#include <benchmark/benchmark.h>

#include <memory>

#include "endonav/approx/layers.hpp"
#include "endonav/approx/param_store.hpp"
#include "endonav/devicesim/device_sim.hpp"
#include "endonav/env/nav_env.hpp"
#include "endonav/replay/replay_buffer.hpp"
#include "endonav/sac/sac_agent.hpp"
#include "endonav/tdmpc2/tdmpc2_agent.hpp"
#include "endonav/vessel/synthetic.hpp"

namespace {

using namespace endonav;

std::shared_ptr<const vessel::VesselTree> arch() {
  static const auto tree = [] {
    Rng rng(1);
    return std::make_shared<const vessel::VesselTree>(vessel::generate_synthetic_anatomy({}, rng));
  }();
  return tree;
}

void BM_NearestLumenPoint(benchmark::State& state) {
  const auto tree = arch();
  Rng rng(2);
  const auto& box = tree->bounding_box();
  for (auto _ : state) {
    const vessel::Vec3 p(rng.uniform(box.min.x(), box.max.x()), rng.uniform(box.min.y(), box.max.y()),
                         rng.uniform(box.min.z(), box.max.z()));
    benchmark::DoNotOptimize(tree->nearest_lumen_point(p));
  }
}
BENCHMARK(BM_NearestLumenPoint);

void BM_PathLength(benchmark::State& state) {
  const auto tree = arch();
  Rng rng(3);
  const auto n = tree->branches().size();
  for (auto _ : state) {
    const std::size_t a = rng.below(n), b = rng.below(n);
    benchmark::DoNotOptimize(tree->path_length({a, rng.uniform(0, tree->branch(a).length())},
                                               {b, rng.uniform(0, tree->branch(b).length())}));
  }
}
BENCHMARK(BM_PathLength);

void BM_EnvStep(benchmark::State& state) {
  env::EpisodeConfig cfg;
  cfg.augment = state.range(0) != 0;
  env::NavEnv e(arch(), cfg);
  const auto task = env::resolve_task(env::TaskId::A2L, *arch());
  Rng rng(4);
  e.reset(task, rng);
  for (auto _ : state) {
    const env::Action a{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto r = e.step(a);
    if (r.terminated || r.truncated) {
      state.PauseTiming();
      e.reset(task, rng);
      state.ResumeTiming();
    }
  }
}
BENCHMARK(BM_EnvStep)->Arg(0)->Arg(1);

void BM_LstmStep(benchmark::State& state) {
  approx::ParamStore store;
  Rng rng(5);
  const auto hidden = state.range(0);
  const auto lstm = approx::Lstm::create(store, "lstm", 23, hidden, rng);
  const approx::Matrix x = approx::Matrix::Random(23, 1);
  auto s = approx::RecurrentState::zeros(hidden);
  for (auto _ : state) {
    s = lstm.infer_step(store, x, s);
    benchmark::DoNotOptimize(s.h.data());
  }
}
BENCHMARK(BM_LstmStep)->Arg(32)->Arg(128);

void BM_SacAct(benchmark::State& state) {
  sac::SacConfig cfg;
  cfg.multitask = true;
  sac::SacAgent agent(cfg, 6);
  agent.begin_episode(env::TaskId::A1);
  Rng rng(7);
  const env::Observation obs;
  for (auto _ : state) benchmark::DoNotOptimize(agent.act(obs, false, rng));
}
BENCHMARK(BM_SacAct);

void BM_Plan(benchmark::State& state) {
  tdmpc2::Tdmpc2Config cfg;
  cfg.plan.samples = static_cast<std::size_t>(state.range(0));
  tdmpc2::WorldModel model(cfg.model, 8);
  Rng rng(9);
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(cfg.model.latent);
  for (auto _ : state) benchmark::DoNotOptimize(tdmpc2::plan(model, z, env::TaskId::A1, cfg.plan, nullptr, rng, true));
}
BENCHMARK(BM_Plan)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_SampleSequences(benchmark::State& state) {
  replay::ReplayBuffer buf;
  Rng rng(10);
  env::NavEnv e(arch(), {});
  const auto task = env::resolve_task(env::TaskId::A1, *arch());
  for (int k = 0; k < 50; ++k) {
    replay::EpisodeRecord ep;
    ep.observations.push_back(e.reset(task, rng));
    bool done = false;
    while (!done) {
      const env::Action a{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      const auto r = e.step(a);
      ep.actions.push_back(a);
      ep.rewards.push_back(r.reward);
      ep.observations.push_back(r.obs);
      ep.terminated = r.terminated;
      ep.truncated = r.truncated;
      done = r.terminated || r.truncated;
    }
    buf.push_episode(std::move(ep));
  }
  for (auto _ : state) benchmark::DoNotOptimize(buf.sample_sequences(32, 32, rng));
}
BENCHMARK(BM_SampleSequences);

}  // namespace

BENCHMARK_MAIN();
