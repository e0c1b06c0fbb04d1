#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "endonav/env/task.hpp"
#include "endonav/replay/rollout.hpp"

namespace endonav::eval {

// Rupture threshold for tip contact forces.
inline constexpr double kForceLimit = 1.5;  // N

struct EpisodeMetrics {
  env::TaskId task = env::TaskId::A1;
  std::string model;
  std::string vasculature;
  std::uint64_t seed = 0;  // episode seed, shared across paired models
  bool success = false;
  std::optional<double> procedure_time;  // s, successful episodes only
  std::optional<double> path_ratio;      // [0, 1], failed episodes only
  double tip_force_mean = 0.0;
  double tip_force_max = 0.0;
  double tip_speed_mean = 0.0;
  double tip_speed_max = 0.0;
  std::size_t steps = 0;
  double initial_pathlength = 0.0;
  double final_pathlength = 0.0;

  friend bool operator==(const EpisodeMetrics&, const EpisodeMetrics&) = default;
};

// (initial - final) / initial clamped to [0, 1]. Throws ArgumentError when
// initial <= 0.
double path_ratio(double initial_path, double final_path);

// (mean, max). Throw ArgumentError on empty input.
std::pair<double, double> force_stats(std::span<const double> forces);
std::pair<double, double> speed_stats(std::span<const double> displacements, double dt);

EpisodeMetrics episode_metrics(const replay::Rollout& rollout, double dt);

}  // namespace endonav::eval
