#pragma once

#include <map>
#include <string>
#include <vector>

#include "endonav/env/policy.hpp"
#include "endonav/eval/metrics.hpp"
#include "endonav/eval/stats.hpp"

namespace endonav::eval {

struct EvalCell {
  env::TaskSpec task;
  std::string vasculature;
  env::Environment* environment = nullptr;
};

// Seed of episode k in cell c: identical for every model evaluated with the
// same base seed, which is what pairs the episodes.
std::uint64_t episode_seed(std::uint64_t base, std::size_t cell, std::size_t episode);

// Deterministic-mode episodes, `episodes_per_cell` per cell.
std::vector<EpisodeMetrics> evaluate(env::Policy& policy, const std::string& model,
                                     const std::vector<EvalCell>& cells,
                                     std::size_t episodes_per_cell, std::uint64_t seed);

struct CellSummary {
  env::TaskId task = env::TaskId::A1;
  std::string model;
  std::size_t episodes = 0;
  MeanStd success;  // percent, Bernoulli spread over episodes
  MeanStd procedure_time;
  MeanStd path_ratio;  // percent
  MeanStd force_mean;
  MeanStd force_max;
  MeanStd speed_mean;
  MeanStd speed_max;
};

inline constexpr std::array<std::string_view, 7> kMetricNames = {
    "success", "procedure_time", "path_ratio", "force_mean", "force_max", "speed_mean", "speed_max"};

struct Comparison {
  env::TaskId task = env::TaskId::A1;
  std::string model_a;
  std::string model_b;
  std::map<std::string, TTestResult> tests;  // keyed by kMetricNames
};

struct AggregateReport {
  std::vector<CellSummary> cells;       // ordered by task, then model first-seen order
  std::vector<Comparison> comparisons;
  std::vector<EpisodeMetrics> episodes; // raw log
};

AggregateReport aggregate(const std::vector<EpisodeMetrics>& episodes);

// Paired tests of model_a against model_b on every task both were evaluated
// on. Episodes pair on (task, vasculature, seed); throws PairingError when
// the two models do not cover the same episodes.
void compare(AggregateReport& report, const std::string& model_a, const std::string& model_b);

}  // namespace endonav::eval
