// endonav: command line front end of the training pipeline.
//
//   endonav gen-anatomy [--config run.json] [--count N] [--holdout K] [--seed S] [--out DIR]
//   endonav pretrain    --config run.json
//   endonav train       --config run.json --algo sac|tdmpc2
//   endonav eval        --config run.json
//   endonav ablate-aug  --config run.json
//   endonav report      --config run.json
//
// ENDONAV_SEED overrides the configured seed. Exit codes: 0 ok, 2 config
// error, 3 stage failure.

#include <charconv>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "endonav/errors.hpp"
#include "endonav/eval/report.hpp"
#include "endonav/pipeline/stages.hpp"

namespace {

using namespace endonav;
using namespace endonav::pipeline;

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

std::uint64_t parse_seed(const std::string& text, const char* what) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ConfigError(std::string(what) + " must be an unsigned integer, got '" + text + "'");
  return v;
}

struct Options {
  std::string config;
  std::string algo;
  std::string out;
  std::optional<std::size_t> count;
  std::optional<std::size_t> holdout;
  std::optional<std::uint64_t> seed;
  bool force = false;
  bool quiet = false;
};

RunConfig resolve_config(const Options& o, bool config_required) {
  RunConfig cfg;
  if (!o.config.empty())
    cfg = load_config(o.config);
  else if (config_required)
    throw ConfigError("--config is required");
  if (o.count) cfg.anatomy.count = *o.count;
  if (o.holdout) cfg.anatomy.holdout = *o.holdout;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.seed) cfg.seed = *o.seed;
  if (const char* env = std::getenv("ENDONAV_SEED")) cfg.seed = parse_seed(env, "ENDONAV_SEED");
  validate(cfg);
  return cfg;
}

void print_summary(const eval::AggregateReport& rep) {
  for (const auto& c : rep.comparisons) {
    const auto& s = c.tests.at("success");
    std::cout << env::to_string(c.task) << ": " << c.model_a << " vs " << c.model_b << " success diff "
              << eval::format_number(s.mean_diff) << " pp, p=" << eval::format_number(s.p)
              << (s.degenerate ? " (degenerate)" : "") << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"endonav: guidewire/catheter navigation training pipeline"};
  app.require_subcommand(1);
  Options o;
  app.add_flag("--force", o.force, "Re-run stages that already completed");
  app.add_flag("-q,--quiet", o.quiet, "Suppress progress output");

  auto* gen = app.add_subcommand("gen-anatomy", "Generate synthetic anatomies and the train/hold-out split");
  gen->add_option("--config", o.config, "Run configuration (JSON)");
  gen->add_option("--count", o.count, "Number of anatomies");
  gen->add_option("--holdout", o.holdout, "Number held out");
  gen->add_option("--seed", o.seed, "Seed");
  gen->add_option("--out", o.out, "Output directory");

  auto* pre = app.add_subcommand("pretrain", "Single-task SAC agents and the prefill replay file");
  auto* trn = app.add_subcommand("train", "Multi-task training from the prefill buffer");
  trn->add_option("--algo", o.algo, "sac or tdmpc2")->required();
  auto* evl = app.add_subcommand("eval", "Paired evaluation of both agents on hold-out anatomies");
  auto* abl = app.add_subcommand("ablate-aug", "TD-MPC2 trained with and without augmentation, compared");
  auto* rep = app.add_subcommand("report", "Summary tables from the evaluation logs");
  for (auto* sub : {pre, trn, evl, abl, rep}) {
    sub->add_option("--config", o.config, "Run configuration (JSON)")->required();
    sub->add_option("--out", o.out, "Override the output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  RunConfig cfg;
  std::optional<Manifest> manifest;
  std::optional<Algo> algo;
  try {
    cfg = resolve_config(o, !gen->parsed());
    if (trn->parsed()) algo = algo_from_string(o.algo);
    manifest = Manifest::open(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ArgumentError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  StageOptions opt{o.force, o.quiet ? nullptr : &std::cerr};
  try {
    if (gen->parsed()) {
      const auto set = gen_anatomy(cfg, *manifest, opt);
      std::cout << "anatomies: " << set.train.size() << " train, " << set.holdout.size() << " hold-out in "
                << cfg.output_dir.string() << '\n';
    } else if (pre->parsed()) {
      pretrain(cfg, *manifest, opt);
    } else if (trn->parsed()) {
      train(cfg, *algo, *manifest, opt);
    } else if (evl->parsed()) {
      print_summary(evaluate(cfg, *manifest, opt));
    } else if (abl->parsed()) {
      print_summary(ablate_augmentation(cfg, *manifest, opt));
    } else if (rep->parsed()) {
      report(cfg, *manifest, opt);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "stage failed: " << e.what() << '\n';
    return kExitStage;
  }
  return 0;
}
