#pragma once

// Recurrent soft actor-critic. Actor and each critic own an LSTM encoder over
// the observation stream (plus a task one-hot in the multi-task variant); the
// actor head emits a tanh-squashed Gaussian.

#include <array>
#include <iosfwd>
#include <vector>

#include "endonav/approx/layers.hpp"
#include "endonav/replay/rollout.hpp"

namespace endonav::sac {

using approx::Matrix;
using replay::SequenceBatch;

struct SacConfig {
  bool multitask = false;
  Eigen::Index lstm_hidden = 128;
  std::vector<Eigen::Index> hidden = {256, 256};
  double gamma = 0.99;
  double tau = 0.005;
  double lr = 3e-4;
  double entropy_target = -4.0;
  double init_alpha = 0.1;
  std::size_t batch = 32;
  std::size_t seq_len = 32;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
  double grad_clip = 0.0;  // global-norm clip per network, 0 disables

  Eigen::Index input_dim() const;
};

// Throws ArgumentError.
void validate(const SacConfig& cfg);

// Per-update Gaussian noise, fixed up front so the losses are deterministic
// functions of the parameters.
struct SacNoise {
  std::vector<Matrix> next;     // L of (4 x B): samples a' ~ pi(.|o_{t+1})
  std::vector<Matrix> current;  // L of (4 x B): samples a ~ pi(.|o_t)
};

SacNoise draw_noise(std::size_t length, std::size_t batch, Rng& rng);

// log pi(tanh(u)) for u = mean + exp(log_std) * eps, with the tanh Jacobian
// written as 2 (log 2 - u - softplus(-2u)). Column-wise sums, (1 x B).
Matrix squashed_log_prob(const Matrix& eps, const Matrix& log_std, const Matrix& u);

class SacAgent final : public replay::Learner {
 public:
  SacAgent(const SacConfig& cfg, std::uint64_t seed);

  const SacConfig& config() const { return cfg_; }

  // Policy interface.
  void begin_episode(env::TaskId task) override;
  env::Action act(const env::Observation& obs, bool deterministic, Rng& rng) override;

  // Lower-level acting on an explicit recurrent state.
  env::Action act_from(const env::Observation& obs, env::TaskId task,
                       approx::RecurrentState& state, bool deterministic, Rng& rng) const;
  // Tanh of the policy mean after one recurrent step from `state`.
  Eigen::VectorXd policy_mean(const env::Observation& obs, env::TaskId task,
                              const approx::RecurrentState& state) const;

  std::size_t batch_size() const override { return cfg_.batch; }
  std::size_t sequence_length() const override { return cfg_.seq_len; }
  replay::Losses update(const SequenceBatch& batch, Rng& rng) override;

  // Pieces of the update, exposed for gradient checks.
  struct CriticPass {
    std::array<std::vector<Matrix>, 2> hidden;  // detached LSTM outputs, L of (H x B)
    approx::Var loss;
  };
  std::vector<Matrix> critic_targets(const SequenceBatch& batch, const SacNoise& noise) const;
  CriticPass critic_loss(approx::Tape& tape, const SequenceBatch& batch,
                         const std::vector<Matrix>& targets);
  // Second output: per-step log pi values (L of 1 x B), detached.
  approx::Var actor_loss(approx::Tape& tape, const SequenceBatch& batch, const SacNoise& noise,
                         const std::array<std::vector<Matrix>, 2>& critic_hidden,
                         std::vector<Matrix>* log_probs = nullptr);
  approx::Var alpha_loss(approx::Tape& tape, const SequenceBatch& batch,
                         const std::vector<Matrix>& log_probs);

  double alpha() const;
  approx::ParamStore& actor_params() { return actor_store_; }
  approx::ParamStore& critic_params() { return critic_store_; }
  approx::ParamStore& target_params() { return target_store_; }
  approx::ParamStore& alpha_params() { return alpha_store_; }
  const approx::ParamStore& actor_params() const { return actor_store_; }
  const approx::ParamStore& critic_params() const { return critic_store_; }
  const approx::ParamStore& target_params() const { return target_store_; }

  void save(std::ostream& out) const;
  // Throws FormatError when the checkpoint does not match this configuration.
  void load(std::istream& in);

 private:
  Matrix inputs(const Matrix& obs, const Matrix& onehot) const;
  std::vector<Matrix> batch_inputs(const std::vector<Matrix>& obs, const SequenceBatch& batch) const;
  approx::RecurrentState burn_in(const approx::Lstm& lstm, const approx::ParamStore& store,
                                 const SequenceBatch& batch) const;
  std::vector<Matrix> unroll(const approx::Lstm& lstm, const approx::ParamStore& store,
                             const std::vector<Matrix>& xs, approx::RecurrentState s) const;
  // (mean, log_std) from actor head output.
  std::pair<Matrix, Matrix> head_split(const Matrix& out) const;

  SacConfig cfg_;
  approx::ParamStore actor_store_;
  approx::ParamStore critic_store_;
  approx::ParamStore target_store_;
  approx::ParamStore alpha_store_;
  approx::Lstm actor_lstm_;
  approx::Mlp actor_head_;
  std::array<approx::Lstm, 2> critic_lstm_;
  std::array<approx::Mlp, 2> critic_head_;
  std::size_t log_alpha_ = 0;

  approx::RecurrentState act_state_;
  env::TaskId act_task_ = env::TaskId::A1;
};

}  // namespace endonav::sac
