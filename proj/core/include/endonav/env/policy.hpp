#pragma once

#include "endonav/env/nav_env.hpp"
#include "endonav/rng.hpp"

namespace endonav::env {

// Anything that can drive an episode: trained agents, scripted probes, stubs.
class Policy {
 public:
  virtual ~Policy() = default;
  // Clears per-episode memory (recurrent state, plan warm start).
  virtual void begin_episode(TaskId task) = 0;
  virtual Action act(const Observation& obs, bool deterministic, Rng& rng) = 0;
};

}  // namespace endonav::env
