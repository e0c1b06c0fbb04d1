#pragma once

// Smallest complete pipeline configuration, written into a scratch directory.

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

namespace endonav::testing {

inline nlohmann::json toy_config_json(const std::filesystem::path& out_dir, std::uint64_t seed = 7) {
  return {
      {"seed", seed},
      {"output_dir", out_dir.string()},
      {"anatomy", {{"kind", "bifurcation"}, {"count", 3}, {"holdout", 1}}},
      {"episode", {{"max_steps", 30}}},
      {"tasks", {"A1", "A2L"}},
      {"sac", {{"lstm_hidden", 6}, {"hidden", {8}}, {"batch", 4}, {"seq_len", 6}}},
      {"tdmpc2",
       {{"lstm_hidden", 6}, {"latent", 6}, {"hidden", {8}}, {"task_dim", 3}, {"ensemble", 2},
        {"horizon", 2}, {"iterations", 2}, {"samples", 16}, {"elites", 4}, {"policy_samples", 2},
        {"batch", 4}, {"seq_len", 6}}},
      {"pretrain", {{"env_steps", 120}, {"warmup_steps", 60}, {"update_every", 4}, {"log_every", 60}}},
      {"prefill_episodes", 2},
      {"train", {{"env_steps", 120}, {"warmup_steps", 0}, {"update_every", 4}, {"log_every", 60}}},
      {"replay_capacity", 100000},
      {"eval_episodes", 2},
  };
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("endonav_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream(path) << doc.dump(2);
  return path;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace endonav::testing
