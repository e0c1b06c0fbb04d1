#pragma once

#include <iosfwd>
#include <optional>

#include "endonav/replay/rollout.hpp"
#include "endonav/tdmpc2/world_model.hpp"

namespace endonav::tdmpc2 {

struct Tdmpc2Config {
  WorldModelConfig model;
  PlanConfig plan;
  LossWeights loss;
  double lr = 3e-4;
  double tau = 0.005;
  std::size_t batch = 32;
  std::size_t seq_len = 0;  // transitions per window; 0 means horizon + 1
  double grad_clip = 20.0;  // global-norm clip per optimiser, 0 disables

  std::size_t window() const { return seq_len == 0 ? plan.horizon + 1 : seq_len; }
};

// Throws ArgumentError.
void validate(const Tdmpc2Config& cfg);

class Tdmpc2Agent final : public replay::Learner {
 public:
  Tdmpc2Agent(const Tdmpc2Config& cfg, std::uint64_t seed);

  const Tdmpc2Config& config() const { return cfg_; }
  WorldModel& model() { return model_; }
  const WorldModel& model() const { return model_; }

  // Encodes the observation into the running recurrent state, then plans.
  void begin_episode(env::TaskId task) override;
  env::Action act(const env::Observation& obs, bool deterministic, Rng& rng) override;
  const std::optional<PlanResult>& last_plan() const { return prev_; }
  const Eigen::VectorXd& last_latent() const { return latent_; }

  std::size_t batch_size() const override { return cfg_.batch; }
  std::size_t sequence_length() const override { return cfg_.window(); }
  replay::Losses update(const SequenceBatch& batch, Rng& rng) override;

  void save(std::ostream& out) const { model_.save(out); }
  void load(std::istream& in) { model_.load(in); }

 private:
  Tdmpc2Config cfg_;
  WorldModel model_;
  RecurrentState state_;
  env::TaskId task_ = env::TaskId::A1;
  std::optional<PlanResult> prev_;
  Eigen::VectorXd latent_;
};

}  // namespace endonav::tdmpc2
