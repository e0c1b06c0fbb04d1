#pragma once

// Run manifest (<output_dir>/manifest.json): config echo, version stamp,
// seeds, anatomy split and per-stage status, wall clock and artifact paths.
// Artifact paths are relative to the output directory.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "endonav/pipeline/run_config.hpp"

namespace endonav::pipeline {

inline constexpr std::string_view kManifestSchema = "endonav-manifest/1";
inline constexpr std::string_view kManifestFile = "manifest.json";

std::string_view version();

// Writes `path` through a sibling temporary file and a rename.
void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body);

struct StageRecord {
  std::string status;  // "running", "ok", "failed"
  double wall_clock_s = 0.0;
  std::vector<std::string> artifacts;
  std::string error;
};

class Manifest {
 public:
  // Loads the manifest of `cfg.output_dir` or starts a fresh one. Throws
  // ConfigError when the directory holds a run made with another config.
  static Manifest open(const RunConfig& cfg);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path file() const { return root_ / kManifestFile; }
  const nlohmann::json& doc() const { return doc_; }

  void set_seed(const std::string& name, std::uint64_t seed);
  void set_anatomies(const std::vector<std::string>& train, const std::vector<std::string>& holdout);
  std::optional<std::pair<std::vector<std::string>, std::vector<std::string>>> anatomies() const;

  std::optional<StageRecord> stage(const std::string& name) const;
  // Completed with every artifact still on disk.
  bool completed(const std::string& name) const;
  void record(const std::string& name, const StageRecord& rec);
  // Every artifact of every stage, in stage order.
  std::vector<std::string> artifacts() const;

  void save() const;

 private:
  std::filesystem::path root_;
  nlohmann::json doc_;
};

// Runs `body` as stage `name`: marks it running, times it and records the
// outcome and artifacts. Exceptions are recorded then rethrown.
void run_stage(Manifest& manifest, const std::string& name,
               const std::function<std::vector<std::string>()>& body);

}  // namespace endonav::pipeline
