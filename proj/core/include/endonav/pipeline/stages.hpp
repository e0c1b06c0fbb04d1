#pragma once

// The two-stage training pipeline behind the CLI subcommands:
//   gen-anatomy -> pretrain (single-task SAC + prefill replay)
//               -> train sac|tdmpc2 -> eval -> report
// plus ablate-aug. Each stage records itself in the run manifest; stages
// already completed with intact artifacts are skipped unless forced.

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "endonav/env/nav_env.hpp"
#include "endonav/eval/evaluate.hpp"
#include "endonav/pipeline/manifest.hpp"
#include "endonav/pipeline/run_config.hpp"

namespace endonav::pipeline {

enum class Algo { Sac, Tdmpc2 };
std::string_view to_string(Algo a);
Algo algo_from_string(std::string_view text);  // throws ArgumentError

struct Anatomy {
  std::string id;
  std::shared_ptr<const vessel::VesselTree> tree;
};

struct AnatomySet {
  std::vector<Anatomy> train;
  std::vector<Anatomy> holdout;
};

struct StageOptions {
  bool force = false;
  std::ostream* log = nullptr;  // progress lines, optional
};

// Task geometry for a tree of the configured anatomy kind. Bifurcation trees
// route the left tasks (A2L, A3L) to the left child and the rest right.
env::TaskSpec task_for(const RunConfig& cfg, env::TaskId id, const vessel::VesselTree& tree);

// Deterministic per (seed, index).
vessel::VesselTree generate_anatomy(const RunConfig& cfg, std::size_t index);

AnatomySet gen_anatomy(const RunConfig& cfg, Manifest& manifest, const StageOptions& opt = {});
// Anatomies of the run; generates them first when needed.
AnatomySet load_anatomies(const RunConfig& cfg, Manifest& manifest, const StageOptions& opt = {});

void pretrain(const RunConfig& cfg, Manifest& manifest, const StageOptions& opt = {});
void train(const RunConfig& cfg, Algo algo, Manifest& manifest, const StageOptions& opt = {});
eval::AggregateReport evaluate(const RunConfig& cfg, Manifest& manifest, const StageOptions& opt = {});
eval::AggregateReport ablate_augmentation(const RunConfig& cfg, Manifest& manifest, const StageOptions& opt = {});
// Rebuilds the summary tables from the stored episode logs.
void report(const RunConfig& cfg, Manifest& manifest, const StageOptions& opt = {});

// Throws std::runtime_error when a hold-out anatomy id appears in any
// training-stage episode log or replay file of the run.
void check_holdout_discipline(const Manifest& manifest);

// Paths inside the output directory.
namespace paths {
inline std::filesystem::path anatomy(const std::string& id) { return std::filesystem::path("anatomy") / (id + ".json"); }
inline std::filesystem::path prefill() { return "pretrain/prefill.replay"; }
inline std::filesystem::path pretrain_checkpoint(env::TaskId t) {
  return std::filesystem::path("pretrain") / ("sac_" + std::string(env::to_string(t)) + ".ckpt");
}
inline std::filesystem::path checkpoint(Algo a) { return std::filesystem::path("train") / (std::string(to_string(a)) + ".ckpt"); }
inline std::filesystem::path eval_report_json() { return "eval/report.json"; }
inline std::filesystem::path eval_report_csv() { return "eval/report.csv"; }
}  // namespace paths

}  // namespace endonav::pipeline
