#pragma once

// Run configuration: a JSON document. Every section is optional and falls
// back to the defaults below; the built-in defaults are the paper-scale
// profile, desk-scale runs override step budgets and network sizes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "endonav/env/nav_env.hpp"
#include "endonav/replay/rollout.hpp"
#include "endonav/sac/sac_agent.hpp"
#include "endonav/tdmpc2/tdmpc2_agent.hpp"

namespace endonav::pipeline {

// Bad or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AnatomyKind { Aortic, Bifurcation };

struct AnatomyConfig {
  AnatomyKind kind = AnatomyKind::Aortic;
  // Generator: `count` anatomies, the last `holdout` of them held out.
  std::size_t count = 15;
  std::size_t holdout = 5;
  // Explicit files instead of the generator (both lists non-empty).
  std::vector<std::filesystem::path> train_files;
  std::vector<std::filesystem::path> holdout_files;

  bool from_files() const { return !train_files.empty() || !holdout_files.empty(); }
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "run";
  AnatomyConfig anatomy;
  // Training episodes are augmented; evaluation always runs unaugmented.
  env::EpisodeConfig episode = [] {
    env::EpisodeConfig e;
    e.augment = true;
    return e;
  }();
  std::vector<env::TaskId> tasks = {env::kAllTasks.begin(), env::kAllTasks.end()};

  sac::SacConfig sac;
  tdmpc2::Tdmpc2Config tdmpc2;

  replay::TrainLoopConfig pretrain = {200'000, 5'000, 1, 1, 10'000};
  std::size_t prefill_episodes = 250;  // per task
  bool prefill_deterministic = false;
  replay::TrainLoopConfig train = {10'000'000, 0, 1, 1, 100'000};
  std::size_t replay_capacity = 10'000'000;

  std::size_t eval_episodes = 50;  // per (task, hold-out anatomy) cell
};

// Throws ConfigError (also for JSON type errors and unknown keys). Relative
// file paths resolve against `base_dir`.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);
void validate(const RunConfig& cfg);

}  // namespace endonav::pipeline
