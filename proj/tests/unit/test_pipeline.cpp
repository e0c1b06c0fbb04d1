#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "endonav/errors.hpp"
#include "endonav/pipeline/stages.hpp"
#include "endonav/replay/replay_file.hpp"
#include "endonav/vessel/anatomy_io.hpp"
#include "support/toy_run.hpp"

using namespace endonav;
using namespace endonav::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + ENDONAV_CLI_PATH + " -q " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("defaults augment training episodes") {
  CHECK(parse_config(json::object()).episode.augment);
  CHECK_FALSE(parse_config(json{{"episode", {{"augment", false}}}}).episode.augment);
}

TEST_CASE("configuration errors") {
  const auto dir = testing::scratch_dir("config");
  const auto base = testing::toy_config_json(dir / "run");
  CHECK_NOTHROW(parse_config(base, dir));

  const auto expect_error = [&](json doc) { CHECK_THROWS_AS(parse_config(doc, dir), ConfigError); };
  auto doc = base;
  doc["bogus"] = 1;
  expect_error(doc);
  doc = base;
  doc["sac"]["hiden"] = json::array({4});
  expect_error(doc);
  doc = base;
  doc["anatomy"]["kind"] = "coronary";
  expect_error(doc);
  doc = base;
  doc["anatomy"]["holdout"] = 3;
  expect_error(doc);
  doc = base;
  doc["episode"]["max_steps"] = 0;
  expect_error(doc);
  doc = base;
  doc["episode"]["max_steps"] = 201;
  expect_error(doc);
  doc = base;
  doc["tasks"] = json::array({"A9"});
  expect_error(doc);
  doc = base;
  doc["sac"]["gamma"] = "high";
  expect_error(doc);
  doc = base;
  doc["tdmpc2"]["elites"] = 100;
  expect_error(doc);

  // File-based anatomies must exist and stay disjoint.
  RunConfig files_cfg = parse_config(base, dir);
  const auto tree_file = dir / "t.json";
  std::ofstream(tree_file) << vessel::save_tree(generate_anatomy(files_cfg, 0));
  doc = base;
  doc["anatomy"] = {{"train_files", {"t.json"}}, {"holdout_files", {"missing.json"}}};
  expect_error(doc);
  doc["anatomy"] = {{"train_files", {"t.json"}}, {"holdout_files", {"t.json"}}};
  expect_error(doc);
  doc["anatomy"] = {{"train_files", {"t.json"}}};
  expect_error(doc);

  CHECK_THROWS_AS(load_config(dir / "nope.json"), ConfigError);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);

  // The echo parses back to the same configuration.
  const RunConfig cfg = parse_config(base, dir);
  CHECK(pipeline::to_json(parse_config(pipeline::to_json(cfg), {})) == pipeline::to_json(cfg));

  CHECK(algo_from_string("sac") == Algo::Sac);
  CHECK(algo_from_string("tdmpc2") == Algo::Tdmpc2);
  CHECK_THROWS_AS(algo_from_string("ppo"), ArgumentError);
  fs::remove_all(dir);
}

TEST_CASE("anatomy generation") {
  const auto dir = testing::scratch_dir("anatomy");
  auto doc = testing::toy_config_json(dir / "a");
  doc["anatomy"] = {{"kind", "aortic"}, {"count", 15}, {"holdout", 5}};
  const RunConfig cfg = parse_config(doc, dir);
  auto m = Manifest::open(cfg);
  const auto set = gen_anatomy(cfg, m);
  CHECK(set.train.size() == 10);
  CHECK(set.holdout.size() == 5);
  const auto ids = m.anatomies();
  REQUIRE(ids);
  CHECK(ids->first.size() == 10);
  CHECK(ids->second.size() == 5);
  for (const auto& h : ids->second)
    CHECK(std::find(ids->first.begin(), ids->first.end(), h) == ids->first.end());
  CHECK(m.completed("gen-anatomy"));

  // Same seed, same files.
  doc["output_dir"] = (dir / "b").string();
  const RunConfig cfg_b = parse_config(doc, dir);
  auto mb = Manifest::open(cfg_b);
  gen_anatomy(cfg_b, mb);
  for (const auto& id : ids->first)
    CHECK(testing::slurp(dir / "a" / paths::anatomy(id)) == testing::slurp(dir / "b" / paths::anatomy(id)));

  // Another seed, other trees.
  doc["seed"] = 8;
  doc["output_dir"] = (dir / "c").string();
  const RunConfig cfg_c = parse_config(doc, dir);
  auto mc = Manifest::open(cfg_c);
  gen_anatomy(cfg_c, mc);
  CHECK(testing::slurp(dir / "a" / paths::anatomy(ids->first[0])) !=
        testing::slurp(dir / "c" / paths::anatomy(ids->first[0])));

  doc["anatomy"] = {{"kind", "aortic"}, {"count", 0}, {"holdout", 0}};
  doc["output_dir"] = (dir / "empty").string();
  const RunConfig cfg0 = parse_config(doc, dir);
  auto m0 = Manifest::open(cfg0);
  const auto none = gen_anatomy(cfg0, m0);
  CHECK(none.train.empty());
  CHECK(none.holdout.empty());
  REQUIRE(m0.anatomies());
  CHECK(m0.anatomies()->first.empty());
  CHECK(m0.anatomies()->second.empty());
  CHECK_THROWS(pretrain(cfg0, m0));
  fs::remove_all(dir);
}

TEST_CASE("toy pipeline: manifest, resumption and hold-out discipline") {
  const auto dir = testing::scratch_dir("pipeline");
  const RunConfig cfg = parse_config(testing::toy_config_json(dir / "run"), dir);
  auto m = Manifest::open(cfg);

  CHECK_THROWS(train(cfg, Algo::Sac, m));  // no prefill yet
  CHECK(m.stage("train-sac").value().status == "failed");
  CHECK_FALSE(m.stage("train-sac").value().error.empty());

  pretrain(cfg, m);
  train(cfg, Algo::Sac, m);
  train(cfg, Algo::Tdmpc2, m);
  const auto report = evaluate(cfg, m);
  CHECK(report.episodes.size() == 2 * 2 * 1 * 2);  // models x tasks x hold-out x episodes
  for (const auto& e : report.episodes) CHECK(e.vasculature == m.anatomies()->second[0]);
  CHECK(report.comparisons.size() == 2);

  // Every recorded stage finished with its artifacts on disk.
  const json& doc = testing::slurp(m.file()).empty() ? json() : json::parse(testing::slurp(m.file()));
  CHECK(doc.at("schema") == kManifestSchema);
  CHECK(doc.at("version") == std::string(version()));
  CHECK(doc.at("config") == pipeline::to_json(cfg));
  for (const char* s : {"gen-anatomy", "pretrain", "train-sac", "train-tdmpc2", "eval"}) {
    CAPTURE(s);
    CHECK(m.completed(s));
    CHECK(m.stage(s)->wall_clock_s >= 0.0);
  }
  for (const auto& a : m.artifacts()) CHECK(fs::exists(m.root() / a));
  CHECK(fs::exists(m.root() / paths::prefill()));
  CHECK(replay::read_episodes(m.root() / paths::prefill()).size() == 2 * 2);
  CHECK_NOTHROW(check_holdout_discipline(m));

  // Completed stages are skipped, forced ones rerun.
  const auto stamp = fs::last_write_time(m.root() / paths::checkpoint(Algo::Sac));
  const double wall = m.stage("train-sac")->wall_clock_s;
  train(cfg, Algo::Sac, m);
  CHECK(fs::last_write_time(m.root() / paths::checkpoint(Algo::Sac)) == stamp);
  CHECK(m.stage("train-sac")->wall_clock_s == wall);
  // A missing artifact makes the stage incomplete again.
  fs::remove(m.root() / paths::checkpoint(Algo::Sac));
  CHECK_FALSE(m.completed("train-sac"));
  train(cfg, Algo::Sac, m);
  CHECK(fs::exists(m.root() / paths::checkpoint(Algo::Sac)));

  // A reopened manifest sees the same state.
  const auto reopened = Manifest::open(cfg);
  CHECK(reopened.completed("eval"));

  // Another config may not reuse the directory.
  auto other = cfg;
  other.seed = 8;
  CHECK_THROWS_AS(Manifest::open(other), ConfigError);

  // A hold-out episode in a training replay is caught.
  {
    replay::ReplayWriter w(m.root() / paths::prefill());
    auto ep = replay::read_episodes(m.root() / paths::prefill()).front();
    ep.vasculature = m.anatomies()->second[0];
    w.append(ep);
  }
  CHECK_THROWS(check_holdout_discipline(m));
  fs::remove_all(dir);
}

TEST_CASE("command line exit codes") {
  if (std::string(ENDONAV_CLI_PATH).empty()) return;  // built without tools
  const auto dir = testing::scratch_dir("cli");
  const auto cfg = testing::write_json(dir / "toy.json", testing::toy_config_json(dir / "run"));
  const std::string c = " --config " + cfg.string();
  CHECK(run_cli("gen-anatomy" + c) == 0);
  CHECK(run_cli("gen-anatomy --config " + (dir / "missing.json").string()) == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("train" + c) == 2);                  // --algo is required
  CHECK(run_cli("train --algo ppo" + c) == 2);
  CHECK(run_cli("gen-anatomy" + c, "ENDONAV_SEED=abc") == 2);
  CHECK(run_cli("eval" + c) == 3);                   // nothing trained yet
  CHECK(run_cli("report" + c) == 3);
  auto bad = testing::toy_config_json(dir / "run");
  bad["episode"]["max_steps"] = 500;
  CHECK(run_cli("pretrain --config " + testing::write_json(dir / "bad.json", bad).string()) == 2);

  // gen-anatomy with explicit count/seed/out flags.
  const auto out = dir / "anat";
  CHECK(run_cli("gen-anatomy --count 4 --holdout 1 --seed 3 --out " + out.string() + c) == 0);
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(out / "anatomy")) n += e.path().extension() == ".json";
  CHECK(n == 4);
  fs::remove_all(dir);
}
