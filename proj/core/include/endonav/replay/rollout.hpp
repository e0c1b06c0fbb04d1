#pragma once

// Episode collection and the generic off-policy training loop shared by the
// single-task, multi-task and prefill stages.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "endonav/env/policy.hpp"
#include "endonav/replay/replay_buffer.hpp"

namespace endonav::replay {

struct Rollout {
  EpisodeRecord record;
  std::vector<env::StepInfo> infos;
  double initial_pathlength = 0.0;
};

Rollout collect_episode(env::Environment& environment, env::Policy& policy,
                        const env::TaskSpec& task, const std::string& vasculature, Rng& rng,
                        bool deterministic);

using Losses = std::map<std::string, double>;

class Learner : public env::Policy {
 public:
  virtual std::size_t batch_size() const = 0;
  virtual std::size_t sequence_length() const = 0;
  // One gradient step on every trainable part. Throws NumericError when a
  // loss or parameter becomes non-finite.
  virtual Losses update(const SequenceBatch& batch, Rng& rng) = 0;
};

// Uniformly random actions, used for warm-up exploration.
class RandomPolicy final : public env::Policy {
 public:
  void begin_episode(env::TaskId) override {}
  env::Action act(const env::Observation&, bool, Rng& rng) override;
};

struct TrainLoopConfig {
  std::size_t env_steps = 10'000;
  std::size_t warmup_steps = 1'000;  // random actions before learning starts
  std::size_t update_every = 1;      // env steps between update rounds
  std::size_t updates_per_round = 1;
  std::size_t log_every = 1'000;     // env steps between progress callbacks
};

// One training world: a named environment and the tasks it offers.
struct TrainSlot {
  env::Environment* environment = nullptr;
  std::string vasculature;
  std::vector<env::TaskSpec> tasks;
};

struct TrainProgress {
  std::size_t env_steps = 0;
  std::size_t episodes = 0;
  std::size_t updates = 0;
  double recent_success = 0.0;  // over the episodes since the last callback
  double recent_return = 0.0;
  Losses last_losses;
};

// Episodes pick a slot and a task uniformly at random, transitions go into
// `buffer` (new episodes are also passed to `on_episode`), and the learner
// is updated from `buffer` once it holds data and warm-up is over.
TrainProgress train_loop(Learner& learner, const std::vector<TrainSlot>& slots,
                         ReplayBuffer& buffer, const TrainLoopConfig& cfg, Rng& rng,
                         const std::function<void(const TrainProgress&)>& on_log = {},
                         const std::function<void(const EpisodeRecord&)>& on_episode = {});

}  // namespace endonav::replay
