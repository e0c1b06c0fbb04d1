#pragma once

// Episode-structured replay shared by the recurrent agents. Episodes are kept
// whole; sampled windows never cross an episode boundary.

#include <Eigen/Core>

#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "endonav/env/nav_env.hpp"
#include "endonav/rng.hpp"
#include "endonav/vessel/augment.hpp"

namespace endonav::replay {

using env::Action;
using env::Observation;
using env::TaskId;
using Matrix = Eigen::MatrixXd;

inline constexpr std::size_t kMaxEpisodeTransitions = 200;
inline constexpr std::size_t kBurnIn = 8;

struct EpisodeRecord {
  TaskId task = TaskId::A1;
  std::string vasculature;
  std::vector<Observation> observations;  // o_0 .. o_T
  std::vector<Action> actions;            // a_0 .. a_{T-1}
  std::vector<double> rewards;            // r_0 .. r_{T-1}
  bool terminated = false;
  bool truncated = false;
  std::optional<vessel::AugmentParams> augment;

  std::size_t transitions() const { return actions.size(); }
  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

// Throws ArgumentError when the record breaks its length invariants.
void validate(const EpisodeRecord& ep);

// Time-major batch of B windows of length L. obs has L + 1 entries so that
// obs[t + 1] is the successor of obs[t]. Steps past an episode end repeat the
// last observation and carry mask 0. The burn-in prefix holds up to kBurnIn
// observations preceding each window, right-aligned, with burn_mask marking
// real entries.
struct SequenceBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<Matrix> obs;      // L + 1 of (18 x B)
  std::vector<Matrix> action;   // L of (4 x B)
  std::vector<Matrix> reward;   // L of (1 x B)
  std::vector<Matrix> done;     // L of (1 x B): 1 on a terminating transition
  std::vector<Matrix> mask;     // L of (1 x B): 1 on real transitions
  std::vector<Matrix> burn_obs;   // kBurnIn of (18 x B)
  std::vector<Matrix> burn_mask;  // kBurnIn of (1 x B)
  std::vector<TaskId> task;       // B
  Matrix task_onehot;             // (5 x B)
  std::vector<std::size_t> episode;  // buffer position of each window's episode
  std::vector<std::size_t> start;    // window start transition
};

Matrix task_onehot(const std::vector<TaskId>& tasks);

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10'000'000);

  // Appends and evicts whole oldest episodes until transitions() <= capacity.
  void push_episode(EpisodeRecord ep);

  // Episode chosen with probability proportional to its transition count,
  // window start uniform over [0, max(0, T - L)]. Throws ArgumentError when
  // the buffer is empty or B, L are zero.
  SequenceBatch sample_sequences(std::size_t batch, std::size_t length, Rng& rng) const;

  std::size_t capacity() const { return capacity_; }
  std::size_t transitions() const { return transitions_; }
  std::size_t episodes() const { return episodes_.size(); }
  const EpisodeRecord& episode(std::size_t i) const { return episodes_.at(i); }
  const std::deque<EpisodeRecord>& all() const { return episodes_; }

  friend bool operator==(const ReplayBuffer& a, const ReplayBuffer& b) {
    return a.capacity_ == b.capacity_ && a.episodes_ == b.episodes_;
  }

 private:
  std::size_t capacity_;
  std::size_t transitions_ = 0;
  std::deque<EpisodeRecord> episodes_;
};

}  // namespace endonav::replay
