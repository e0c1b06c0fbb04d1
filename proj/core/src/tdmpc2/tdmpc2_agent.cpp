#include "endonav/tdmpc2/tdmpc2_agent.hpp"

#include <cmath>

#include "endonav/errors.hpp"

namespace endonav::tdmpc2 {
namespace {

std::vector<Matrix> normal_noise(std::size_t length, std::size_t batch, Rng& rng) {
  std::vector<Matrix> out;
  const auto A = static_cast<Eigen::Index>(env::kActionDim);
  const auto B = static_cast<Eigen::Index>(batch);
  for (std::size_t t = 0; t < length; ++t) {
    Matrix m(A, B);
    for (Eigen::Index j = 0; j < B; ++j)
      for (Eigen::Index i = 0; i < A; ++i) m(i, j) = rng.normal();
    out.push_back(std::move(m));
  }
  return out;
}

void check_finite(double v, const char* what, std::uint64_t step) {
  if (!std::isfinite(v))
    throw NumericError(std::string("world-model update ") + std::to_string(step) + ": non-finite " + what);
}

}  // namespace

void validate(const Tdmpc2Config& cfg) {
  validate(cfg.model);
  validate(cfg.plan);
  if (!(cfg.lr > 0.0)) throw ArgumentError("tdmpc2: lr must be positive");
  if (!(cfg.tau > 0.0 && cfg.tau <= 1.0)) throw ArgumentError("tdmpc2: tau must lie in (0, 1]");
  if (cfg.batch == 0) throw ArgumentError("tdmpc2: batch must be positive");
  if (cfg.window() < cfg.plan.horizon + 1)
    throw ArgumentError("tdmpc2: seq_len must be at least horizon + 1");
  if (!(cfg.loss.gamma > 0.0 && cfg.loss.gamma < 1.0)) throw ArgumentError("tdmpc2: gamma must lie in (0, 1)");
  if (!(cfg.loss.rho > 0.0 && cfg.loss.rho <= 1.0)) throw ArgumentError("tdmpc2: rho must lie in (0, 1]");
}

Tdmpc2Agent::Tdmpc2Agent(const Tdmpc2Config& cfg, std::uint64_t seed) : cfg_(cfg), model_(cfg.model, seed) {
  validate(cfg_);
  state_ = model_.initial_state();
}

void Tdmpc2Agent::begin_episode(env::TaskId task) {
  task_ = task;
  state_ = model_.initial_state();
  prev_.reset();
}

env::Action Tdmpc2Agent::act(const env::Observation& obs, bool deterministic, Rng& rng) {
  latent_ = model_.encode_step(obs, task_, state_);
  PlanResult r = plan(model_, latent_, task_, cfg_.plan, prev_ ? &*prev_ : nullptr, rng, deterministic);
  const env::Action a = r.action;
  prev_ = std::move(r);
  return a;
}

replay::Losses Tdmpc2Agent::update(const SequenceBatch& batch, Rng& rng) {
  if (batch.length < cfg_.plan.horizon + 1)
    throw ArgumentError("tdmpc2 update: window shorter than horizon + 1");
  const std::uint64_t step = model_.model_params().steps();
  const auto target_noise = normal_noise(batch.length, batch.batch, rng);
  const auto policy_noise = normal_noise(batch.length, batch.batch, rng);
  const JointTargets targets = model_.compute_targets(batch, target_noise, cfg_.loss);

  Tape tape;
  model_.model_params().zero_grad();
  model_.q_params().zero_grad();
  const JointLoss jl = model_.joint_loss(tape, batch, targets, cfg_.loss);
  const double total = tape.value(jl.total)(0, 0);
  check_finite(total, "joint loss", step);
  tape.backward(jl.total);

  Tape pi_tape;
  model_.policy_params().zero_grad();
  const Var pl = model_.policy_loss(pi_tape, jl.rollout, batch, policy_noise, cfg_.loss);
  const double lp = pi_tape.value(pl)(0, 0);
  check_finite(lp, "policy loss", step);
  pi_tape.backward(pl);

  if (cfg_.grad_clip > 0.0) {
    approx::clip_grad_norm(model_.model_params(), cfg_.grad_clip);
    approx::clip_grad_norm(model_.q_params(), cfg_.grad_clip);
    approx::clip_grad_norm(model_.policy_params(), cfg_.grad_clip);
  }
  const approx::AdamConfig adam{cfg_.lr};
  approx::adam_update(model_.model_params(), adam);
  approx::adam_update(model_.q_params(), adam);
  approx::adam_update(model_.policy_params(), adam);
  approx::soft_update(model_.q_target_params(), model_.q_params(), cfg_.tau);
  if (!model_.model_params().all_finite() || !model_.q_params().all_finite() ||
      !model_.policy_params().all_finite())
    throw NumericError("world-model update " + std::to_string(step) + ": parameters became non-finite");

  return {{"consistency", jl.consistency}, {"reward", jl.reward}, {"value", jl.value},
          {"policy", lp}, {"total", total}};
}

}  // namespace endonav::tdmpc2
