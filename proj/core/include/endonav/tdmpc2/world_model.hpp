#pragma once

// Latent world model: an LSTM observation embedder with a tanh-bounded latent
// projection, latent dynamics, reward head, an ensemble of Q heads with
// target copies, a squashed-Gaussian policy prior, and a learnable task
// embedding table. Dynamics, reward, Q and policy all consume
// [latent; action; task embedding] (the policy without the action).

#include <array>
#include <iosfwd>
#include <vector>

#include "endonav/approx/layers.hpp"
#include "endonav/replay/replay_buffer.hpp"
#include "endonav/tdmpc2/planner.hpp"

namespace endonav::tdmpc2 {

using approx::ParamStore;
using approx::RecurrentState;
using approx::Tape;
using approx::Var;
using replay::SequenceBatch;

struct WorldModelConfig {
  Eigen::Index lstm_hidden = 128;
  Eigen::Index latent = 64;
  std::vector<Eigen::Index> hidden = {256, 256};
  Eigen::Index task_dim = 16;
  std::size_t ensemble = 5;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
};

void validate(const WorldModelConfig& cfg);

struct LossWeights {
  double consistency = 20.0;
  double reward = 0.1;
  double value = 0.1;
  double rho = 0.5;            // per-step decay of the rollout losses
  double entropy = 1e-4;       // policy-prior entropy penalty coefficient
  double gamma = 0.99;
};

struct JointTargets {
  std::vector<Matrix> latent;  // L of (latent x B): stopgrad embeddings of o_1 .. o_L
  std::vector<Matrix> value;   // L of (1 x B): TD targets
};

struct JointLoss {
  Var total;
  double consistency = 0.0;
  double reward = 0.0;
  double value = 0.0;
  std::vector<Matrix> rollout;  // detached imagined latents z^_0 .. z^_{L-1}
};

class WorldModel final : public LatentModel {
 public:
  WorldModel(const WorldModelConfig& cfg, std::uint64_t seed);

  const WorldModelConfig& config() const { return cfg_; }

  // One recurrent embedder step; returns the latent of the history so far.
  Eigen::VectorXd encode_step(const env::Observation& obs, TaskId task, RecurrentState& state) const;
  // Latent after feeding `window` from a zero recurrent state.
  Eigen::VectorXd encode(const std::vector<env::Observation>& window, TaskId task) const;
  RecurrentState initial_state() const { return RecurrentState::zeros(cfg_.lstm_hidden); }

  // One latent transition and predicted reward.
  std::pair<Eigen::VectorXd, double> imagine(const Eigen::VectorXd& z, const Action& a, TaskId task) const;

  // LatentModel.
  Matrix next(const Matrix& z, const Matrix& a, TaskId task) const override;
  Matrix reward(const Matrix& z, const Matrix& a, TaskId task) const override;
  Matrix value(const Matrix& z, const Matrix& a, TaskId task, Rng& rng) const override;
  Matrix policy(const Matrix& z, TaskId task, Rng& rng) const override;

  // Mean-action policy output (tanh of mean), (4 x N).
  Matrix policy_mean(const Matrix& z, TaskId task) const;

  // Batched helpers over per-column tasks.
  Matrix task_embedding(const Matrix& onehot) const;
  Matrix q_values(const ParamStore& store, const Matrix& z, const Matrix& a, const Matrix& e) const;  // (E x N)

  // Encoder latents of obs[0..L] after burn-in, no tape.
  std::vector<Matrix> embed_sequence(const SequenceBatch& batch) const;

  // Targets with policy-prior actions a' = tanh(mean + std * noise[t]) at
  // each next latent; min over the full target ensemble.
  JointTargets compute_targets(const SequenceBatch& batch, const std::vector<Matrix>& noise,
                               const LossWeights& w) const;
  // Consistency + reward + value loss over model and Q parameters.
  JointLoss joint_loss(Tape& tape, const SequenceBatch& batch, const JointTargets& targets,
                       const LossWeights& w);
  // Policy-prior loss on detached latents and frozen Q heads.
  Var policy_loss(Tape& tape, const std::vector<Matrix>& latents, const SequenceBatch& batch,
                  const std::vector<Matrix>& noise, const LossWeights& w);

  ParamStore& model_params() { return model_store_; }
  ParamStore& q_params() { return q_store_; }
  ParamStore& q_target_params() { return q_target_store_; }
  ParamStore& policy_params() { return pi_store_; }
  const ParamStore& model_params() const { return model_store_; }
  const ParamStore& q_params() const { return q_store_; }
  const ParamStore& q_target_params() const { return q_target_store_; }
  const ParamStore& policy_params() const { return pi_store_; }

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  Matrix latent_from_hidden(const Matrix& h, const Matrix& e) const;
  Matrix za(const Matrix& z, const Matrix& a, const Matrix& e) const;
  Matrix onehot_cols(TaskId task, Eigen::Index n) const;
  std::pair<Matrix, Matrix> policy_head(const Matrix& z, const Matrix& e) const;  // mean, log_std
  RecurrentState burn_in(const SequenceBatch& batch) const;

  WorldModelConfig cfg_;
  ParamStore model_store_;
  ParamStore q_store_;
  ParamStore q_target_store_;
  ParamStore pi_store_;
  approx::Lstm lstm_;
  approx::Dense project_;
  approx::Mlp dynamics_;
  approx::Mlp reward_;
  std::vector<approx::Mlp> q_;
  approx::Mlp pi_;
  std::size_t task_table_ = 0;
};

}  // namespace endonav::tdmpc2
