#include "endonav/replay/replay_buffer.hpp"

#include <algorithm>
#include <cmath>

#include "endonav/errors.hpp"

namespace endonav::replay {

void validate(const EpisodeRecord& ep) {
  const std::size_t t = ep.actions.size();
  if (t == 0) throw ArgumentError("episode has no transitions");
  if (t > kMaxEpisodeTransitions)
    throw ArgumentError("episode has " + std::to_string(t) + " transitions, limit is 200");
  if (ep.rewards.size() != t || ep.observations.size() != t + 1)
    throw ArgumentError("episode length mismatch: " + std::to_string(ep.observations.size()) +
                        " observations, " + std::to_string(t) + " actions, " +
                        std::to_string(ep.rewards.size()) + " rewards");
  if (ep.terminated && ep.truncated) throw ArgumentError("episode both terminated and truncated");
  for (double r : ep.rewards)
    if (!std::isfinite(r)) throw ArgumentError("episode has a non-finite reward");
}

Matrix task_onehot(const std::vector<TaskId>& tasks) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(env::kTaskCount),
                          static_cast<Eigen::Index>(tasks.size()));
  for (std::size_t j = 0; j < tasks.size(); ++j)
    m(static_cast<Eigen::Index>(env::task_index(tasks[j])), static_cast<Eigen::Index>(j)) = 1.0;
  return m;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ArgumentError("replay capacity must be positive");
}

void ReplayBuffer::push_episode(EpisodeRecord ep) {
  validate(ep);
  transitions_ += ep.transitions();
  episodes_.push_back(std::move(ep));
  while (transitions_ > capacity_ && !episodes_.empty()) {
    transitions_ -= episodes_.front().transitions();
    episodes_.pop_front();
  }
}

SequenceBatch ReplayBuffer::sample_sequences(std::size_t batch, std::size_t length, Rng& rng) const {
  if (episodes_.empty()) throw ArgumentError("cannot sample from an empty replay buffer");
  if (batch == 0 || length == 0) throw ArgumentError("batch size and sequence length must be positive");

  const auto B = static_cast<Eigen::Index>(batch);
  const auto O = static_cast<Eigen::Index>(env::kObsDim);
  const auto A = static_cast<Eigen::Index>(env::kActionDim);
  SequenceBatch out;
  out.batch = batch;
  out.length = length;
  out.obs.assign(length + 1, Matrix::Zero(O, B));
  out.action.assign(length, Matrix::Zero(A, B));
  out.reward.assign(length, Matrix::Zero(1, B));
  out.done.assign(length, Matrix::Zero(1, B));
  out.mask.assign(length, Matrix::Zero(1, B));
  out.burn_obs.assign(kBurnIn, Matrix::Zero(O, B));
  out.burn_mask.assign(kBurnIn, Matrix::Zero(1, B));

  for (std::size_t j = 0; j < batch; ++j) {
    // Proportional-to-length episode draw via a scan over the deque.
    std::uint64_t pick = rng.below(transitions_);
    std::size_t e = 0;
    while (pick >= episodes_[e].transitions()) pick -= episodes_[e++].transitions();
    const EpisodeRecord& ep = episodes_[e];
    const std::size_t T = ep.transitions();
    const std::size_t max_start = T > length ? T - length : 0;
    const std::size_t start = static_cast<std::size_t>(rng.below(max_start + 1));
    const auto col = static_cast<Eigen::Index>(j);

    for (std::size_t t = 0; t <= length; ++t) {
      const std::size_t k = std::min(start + t, T);
      out.obs[t].col(col) = ep.observations[k].flatten();
    }
    for (std::size_t t = 0; t < length; ++t) {
      const std::size_t k = start + t;
      if (k >= T) continue;
      for (Eigen::Index i = 0; i < A; ++i)
        out.action[t](i, col) = ep.actions[k][static_cast<std::size_t>(i)];
      out.reward[t](0, col) = ep.rewards[k];
      out.done[t](0, col) = (ep.terminated && k + 1 == T) ? 1.0 : 0.0;
      out.mask[t](0, col) = 1.0;
    }
    const std::size_t burn = std::min(start, kBurnIn);
    for (std::size_t b = 0; b < burn; ++b) {
      const std::size_t slot = kBurnIn - burn + b;
      out.burn_obs[slot].col(col) = ep.observations[start - burn + b].flatten();
      out.burn_mask[slot](0, col) = 1.0;
    }
    out.task.push_back(ep.task);
    out.episode.push_back(e);
    out.start.push_back(start);
  }
  out.task_onehot = task_onehot(out.task);
  return out;
}

}  // namespace endonav::replay
