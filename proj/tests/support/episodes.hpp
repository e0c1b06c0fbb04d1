#pragma once

// Random replay content for agent tests.

#include "endonav/replay/replay_buffer.hpp"

namespace endonav::testing {

inline replay::EpisodeRecord random_episode(Rng& rng, std::size_t T, env::TaskId task,
                                            bool terminated) {
  replay::EpisodeRecord ep;
  ep.task = task;
  ep.vasculature = "random";
  env::Action prev{};
  for (std::size_t k = 0; k <= T; ++k) {
    env::Observation o;
    for (auto& p : o.tracking_now) p = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (auto& p : o.tracking_prev) p = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    o.target = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    o.prev_action = prev;
    ep.observations.push_back(o);
    if (k == T) break;
    env::Action a;
    for (double& v : a) v = rng.uniform(-1, 1);
    ep.actions.push_back(a);
    ep.rewards.push_back(rng.uniform(-0.01, 0.01) + (terminated && k + 1 == T ? 1.0 : 0.0));
    prev = a;
  }
  ep.terminated = terminated;
  return ep;
}

inline replay::ReplayBuffer random_buffer(Rng& rng, std::size_t episodes = 6) {
  replay::ReplayBuffer buf;
  for (std::size_t i = 0; i < episodes; ++i)
    buf.push_episode(random_episode(rng, 3 + rng.below(20), env::kAllTasks[i % env::kTaskCount],
                                    i % 2 == 0));
  return buf;
}

}  // namespace endonav::testing
