#include "endonav/pipeline/stages.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "endonav/errors.hpp"
#include "endonav/eval/report.hpp"
#include "endonav/replay/replay_file.hpp"
#include "endonav/sac/sac_agent.hpp"
#include "endonav/tdmpc2/tdmpc2_agent.hpp"
#include "endonav/vessel/anatomy_io.hpp"
#include "endonav/vessel/synthetic.hpp"

namespace endonav::pipeline {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Seed streams.
constexpr std::uint64_t kAnatomyStream = 0x1000;
constexpr std::uint64_t kPretrainStream = 0x2000;
constexpr std::uint64_t kPrefillStream = 0x2100;
constexpr std::uint64_t kTrainStream = 0x3000;
constexpr std::uint64_t kEvalStream = 0x4000;
constexpr std::uint64_t kAblationStream = 0x5000;

void say(const StageOptions& opt, const std::string& line) {
  if (opt.log) *opt.log << line << std::endl;
}

std::string anatomy_id(std::size_t i) {
  std::ostringstream s;
  s << "vessel_" << std::setw(2) << std::setfill('0') << i;
  return s.str();
}

std::shared_ptr<const vessel::VesselTree> share(vessel::VesselTree t) {
  return std::make_shared<const vessel::VesselTree>(std::move(t));
}

// One environment per anatomy, owned alongside the slots pointing at them.
struct Slots {
  std::vector<std::unique_ptr<env::NavEnv>> envs;
  std::vector<replay::TrainSlot> slots;
};

Slots make_slots(const RunConfig& cfg, const std::vector<Anatomy>& trees, const std::vector<env::TaskId>& tasks,
                 const env::EpisodeConfig& episode) {
  Slots out;
  for (const auto& a : trees) {
    out.envs.push_back(std::make_unique<env::NavEnv>(a.tree, episode));
    replay::TrainSlot slot;
    slot.environment = out.envs.back().get();
    slot.vasculature = a.id;
    for (auto t : tasks) slot.tasks.push_back(task_for(cfg, t, *a.tree));
    out.slots.push_back(std::move(slot));
  }
  return out;
}

json episode_line(const replay::EpisodeRecord& ep) {
  double ret = 0.0;
  for (double r : ep.rewards) ret += r;
  return {{"task", env::to_string(ep.task)},
          {"vasculature", ep.vasculature},
          {"steps", ep.rewards.size()},
          {"return", ret},
          {"success", ep.terminated}};
}

json progress_line(const replay::TrainProgress& p) {
  return {{"env_steps", p.env_steps},   {"episodes", p.episodes},         {"updates", p.updates},
          {"success", p.recent_success}, {"return", p.recent_return}, {"losses", p.last_losses}};
}

// Collects JSON lines and writes them atomically at the end of a stage.
struct JsonLog {
  std::vector<json> lines;
  void write(const fs::path& path) const {
    write_atomic(path, [&](std::ostream& out) {
      for (const auto& l : lines) out << l.dump() << '\n';
    });
  }
};

std::unique_ptr<replay::Learner> make_agent(const RunConfig& cfg, Algo algo, std::uint64_t seed) {
  if (algo == Algo::Sac) {
    auto sc = cfg.sac;
    sc.multitask = true;
    return std::make_unique<sac::SacAgent>(sc, seed);
  }
  return std::make_unique<tdmpc2::Tdmpc2Agent>(cfg.tdmpc2, seed);
}

void save_agent(replay::Learner& agent, const fs::path& path) {
  write_atomic(path, [&](std::ostream& out) {
    if (auto* s = dynamic_cast<sac::SacAgent*>(&agent))
      s->save(out);
    else
      dynamic_cast<tdmpc2::Tdmpc2Agent&>(agent).save(out);
  });
}

void load_agent(replay::Learner& agent, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing checkpoint '" + path.string() + "'");
  if (auto* s = dynamic_cast<sac::SacAgent*>(&agent))
    s->load(in);
  else
    dynamic_cast<tdmpc2::Tdmpc2Agent&>(agent).load(in);
}

std::vector<std::string> rel(std::initializer_list<fs::path> ps) {
  std::vector<std::string> out;
  for (const auto& p : ps) out.push_back(p.generic_string());
  return out;
}

// Multi-task training from the prefill buffer; returns the trained agent.
std::unique_ptr<replay::Learner> train_agent(const RunConfig& cfg, Algo algo, const AnatomySet& anat,
                                             const env::EpisodeConfig& episode, std::uint64_t seed,
                                             const fs::path& root, JsonLog& curve, JsonLog& episodes,
                                             const StageOptions& opt) {
  const fs::path prefill = root / paths::prefill();
  if (!fs::exists(prefill)) throw std::runtime_error("prefill replay '" + prefill.string() + "' missing; run pretrain first");
  auto buffer = replay::load(prefill, cfg.replay_capacity);
  auto agent = make_agent(cfg, algo, derive_seed(seed, 1));
  auto slots = make_slots(cfg, anat.train, cfg.tasks, episode);
  Rng rng(derive_seed(seed, 2));
  replay::train_loop(
      *agent, slots.slots, buffer, cfg.train, rng,
      [&](const replay::TrainProgress& p) {
        curve.lines.push_back(progress_line(p));
        say(opt, std::string(to_string(algo)) + " step " + std::to_string(p.env_steps) +
                     " success " + std::to_string(p.recent_success));
      },
      [&](const replay::EpisodeRecord& ep) { episodes.lines.push_back(episode_line(ep)); });
  return agent;
}

std::vector<eval::EpisodeMetrics> evaluate_model(const RunConfig& cfg, replay::Learner& agent,
                                                 const std::string& model, const AnatomySet& anat) {
  auto episode = cfg.episode;
  episode.augment = false;
  std::vector<std::unique_ptr<env::NavEnv>> envs;
  std::vector<eval::EvalCell> cells;
  for (auto t : cfg.tasks) {
    for (const auto& a : anat.holdout) {
      envs.push_back(std::make_unique<env::NavEnv>(a.tree, episode));
      cells.push_back({task_for(cfg, t, *a.tree), a.id, envs.back().get()});
    }
  }
  return eval::evaluate(agent, model, cells, cfg.eval_episodes, derive_seed(cfg.seed, kEvalStream));
}

void require_anatomies(const AnatomySet& a) {
  if (a.train.empty() || a.holdout.empty())
    throw std::runtime_error("the run needs at least one training and one hold-out anatomy");
}

}  // namespace

std::string_view to_string(Algo a) { return a == Algo::Sac ? "sac" : "tdmpc2"; }

Algo algo_from_string(std::string_view text) {
  if (text == "sac") return Algo::Sac;
  if (text == "tdmpc2") return Algo::Tdmpc2;
  throw ArgumentError("unknown algorithm '" + std::string(text) + "' (expected sac or tdmpc2)");
}

env::TaskSpec task_for(const RunConfig& cfg, env::TaskId id, const vessel::VesselTree& tree) {
  if (cfg.anatomy.kind == AnatomyKind::Bifurcation) {
    const bool right = id != env::TaskId::A2L && id != env::TaskId::A3L;
    auto spec = env::bifurcation_task(id, right);
    env::validate_task(spec, tree);
    return spec;
  }
  return env::resolve_task(id, tree);
}

vessel::VesselTree generate_anatomy(const RunConfig& cfg, std::size_t index) {
  Rng rng(derive_seed(derive_seed(cfg.seed, kAnatomyStream), index));
  if (cfg.anatomy.kind == AnatomyKind::Bifurcation) {
    vessel::BifurcationSpec spec;
    spec.split_angle = rng.uniform(25.0, 45.0) * vessel::kDeg;
    spec.trunk_length = rng.uniform(45.0, 55.0);
    spec.child_length = rng.uniform(45.0, 55.0);
    return vessel::generate_bifurcation(spec);
  }
  vessel::AnatomySpec spec;
  spec.arch_type = index % 2 == 0 ? vessel::ArchType::TypeI : vessel::ArchType::TypeII;
  return vessel::generate_synthetic_anatomy(spec, rng);
}

AnatomySet gen_anatomy(const RunConfig& cfg, Manifest& manifest, const StageOptions& opt) {
  AnatomySet out;
  if (cfg.anatomy.from_files()) {
    std::set<std::string> ids;
    const auto add = [&](const fs::path& f, std::vector<Anatomy>& into) {
      const std::string id = f.stem().string();
      if (!ids.insert(id).second) throw ConfigError("duplicate anatomy id '" + id + "'");
      into.push_back({id, share(vessel::load_tree_file(f))});
    };
    for (const auto& f : cfg.anatomy.train_files) add(f, out.train);
    for (const auto& f : cfg.anatomy.holdout_files) add(f, out.holdout);
    return out;
  }
  const std::size_t n_train = cfg.anatomy.count - std::min(cfg.anatomy.count, cfg.anatomy.holdout);
  for (std::size_t i = 0; i < cfg.anatomy.count; ++i)
    (i < n_train ? out.train : out.holdout).push_back({anatomy_id(i), share(generate_anatomy(cfg, i))});

  if (!opt.force && manifest.completed("gen-anatomy")) return out;
  run_stage(manifest, "gen-anatomy", [&] {
    std::vector<std::string> artifacts, train_ids, holdout_ids;
    for (const auto* group : {&out.train, &out.holdout}) {
      for (const auto& a : *group) {
        const auto p = paths::anatomy(a.id);
        const std::string doc = vessel::save_tree(*a.tree);
        write_atomic(manifest.root() / p, [&](std::ostream& o) { o << doc; });
        artifacts.push_back(p.generic_string());
        (group == &out.train ? train_ids : holdout_ids).push_back(a.id);
      }
    }
    manifest.set_anatomies(train_ids, holdout_ids);
    manifest.set_seed("anatomy", derive_seed(cfg.seed, kAnatomyStream));
    say(opt, "gen-anatomy: " + std::to_string(train_ids.size()) + " train, " + std::to_string(holdout_ids.size()) +
                 " hold-out");
    return artifacts;
  });
  return out;
}

AnatomySet load_anatomies(const RunConfig& cfg, Manifest& manifest, const StageOptions& opt) {
  if (cfg.anatomy.from_files() || !manifest.completed("gen-anatomy")) return gen_anatomy(cfg, manifest, opt);
  const auto ids = manifest.anatomies();
  if (!ids) return gen_anatomy(cfg, manifest, {true, opt.log});
  AnatomySet out;
  for (const auto& id : ids->first) out.train.push_back({id, share(vessel::load_tree_file(manifest.root() / paths::anatomy(id)))});
  for (const auto& id : ids->second) out.holdout.push_back({id, share(vessel::load_tree_file(manifest.root() / paths::anatomy(id)))});
  return out;
}

void pretrain(const RunConfig& cfg, Manifest& manifest, const StageOptions& opt) {
  const auto anat = load_anatomies(cfg, manifest, opt);
  if (!opt.force && manifest.completed("pretrain")) return;
  require_anatomies(anat);
  const fs::path root = manifest.root();
  run_stage(manifest, "pretrain", [&] {
    std::vector<std::string> artifacts;
    const fs::path prefill = root / paths::prefill();
    fs::create_directories(prefill.parent_path());
    auto tmp = prefill;
    tmp += ".tmp";
    JsonLog episodes;
    {
      replay::ReplayWriter writer(tmp, true);
      for (std::size_t k = 0; k < cfg.tasks.size(); ++k) {
        const auto task = cfg.tasks[k];
        const std::uint64_t seed = derive_seed(derive_seed(cfg.seed, kPretrainStream), env::task_index(task));
        auto sc = cfg.sac;
        sc.multitask = false;
        sac::SacAgent agent(sc, derive_seed(seed, 1));
        auto slots = make_slots(cfg, anat.train, {task}, cfg.episode);
        replay::ReplayBuffer buffer(cfg.replay_capacity);
        Rng rng(derive_seed(seed, 2));
        replay::train_loop(
            agent, slots.slots, buffer, cfg.pretrain, rng,
            [&](const replay::TrainProgress& p) {
              say(opt, "pretrain " + std::string(env::to_string(task)) + " step " + std::to_string(p.env_steps) +
                           " success " + std::to_string(p.recent_success));
            },
            [&](const replay::EpisodeRecord& ep) { episodes.lines.push_back(episode_line(ep)); });
        const auto ckpt = paths::pretrain_checkpoint(task);
        save_agent(agent, root / ckpt);
        artifacts.push_back(ckpt.generic_string());

        // Prefill: episodes of the trained single-task agent, round robin
        // over the training anatomies.
        Rng prng(derive_seed(derive_seed(cfg.seed, kPrefillStream), env::task_index(task)));
        std::size_t successes = 0;
        for (std::size_t e = 0; e < cfg.prefill_episodes; ++e) {
          auto& slot = slots.slots[e % slots.slots.size()];
          auto ro = replay::collect_episode(*slot.environment, agent, slot.tasks.front(), slot.vasculature, prng,
                                            cfg.prefill_deterministic);
          successes += ro.record.terminated ? 1 : 0;
          writer.append(ro.record);
        }
        say(opt, "prefill " + std::string(env::to_string(task)) + ": " + std::to_string(successes) + "/" +
                     std::to_string(cfg.prefill_episodes) + " successful");
      }
      writer.flush();
    }
    fs::rename(tmp, prefill);
    artifacts.push_back(paths::prefill().generic_string());
    const fs::path log = "pretrain/episodes.jsonl";
    episodes.write(root / log);
    artifacts.push_back(log.generic_string());
    manifest.set_seed("pretrain", derive_seed(cfg.seed, kPretrainStream));
    manifest.set_seed("prefill", derive_seed(cfg.seed, kPrefillStream));
    return artifacts;
  });
  check_holdout_discipline(manifest);
}

void train(const RunConfig& cfg, Algo algo, Manifest& manifest, const StageOptions& opt) {
  const std::string stage = "train-" + std::string(to_string(algo));
  const auto anat = load_anatomies(cfg, manifest, opt);
  if (!opt.force && manifest.completed(stage)) return;
  require_anatomies(anat);
  const fs::path root = manifest.root();
  run_stage(manifest, stage, [&] {
    const std::uint64_t seed = derive_seed(derive_seed(cfg.seed, kTrainStream), static_cast<std::uint64_t>(algo));
    JsonLog curve, episodes;
    auto agent = train_agent(cfg, algo, anat, cfg.episode, seed, root, curve, episodes, opt);
    const fs::path dir = "train";
    const auto ckpt = paths::checkpoint(algo);
    const auto curve_path = dir / (std::string(to_string(algo)) + "_curve.jsonl");
    const auto ep_path = dir / (std::string(to_string(algo)) + "_episodes.jsonl");
    save_agent(*agent, root / ckpt);
    curve.write(root / curve_path);
    episodes.write(root / ep_path);
    manifest.set_seed(stage, seed);
    return rel({ckpt, curve_path, ep_path});
  });
  check_holdout_discipline(manifest);
}

eval::AggregateReport evaluate(const RunConfig& cfg, Manifest& manifest, const StageOptions& opt) {
  const auto anat = load_anatomies(cfg, manifest, opt);
  require_anatomies(anat);
  const fs::path root = manifest.root();
  eval::AggregateReport report;
  run_stage(manifest, "eval", [&] {
    std::vector<eval::EpisodeMetrics> all;
    for (Algo algo : {Algo::Tdmpc2, Algo::Sac}) {
      auto agent = make_agent(cfg, algo, 0);
      load_agent(*agent, root / paths::checkpoint(algo));
      auto m = evaluate_model(cfg, *agent, std::string(to_string(algo)), anat);
      all.insert(all.end(), m.begin(), m.end());
      say(opt, "eval " + std::string(to_string(algo)) + ": " + std::to_string(m.size()) + " episodes");
    }
    report = eval::aggregate(all);
    eval::compare(report, "tdmpc2", "sac");
    eval::write_report(report, root / paths::eval_report_json(), eval::ReportFormat::Json);
    eval::write_report(report, root / paths::eval_report_csv(), eval::ReportFormat::Csv);
    manifest.set_seed("eval", derive_seed(cfg.seed, kEvalStream));
    return rel({paths::eval_report_json(), paths::eval_report_csv()});
  });
  return report;
}

eval::AggregateReport ablate_augmentation(const RunConfig& cfg, Manifest& manifest, const StageOptions& opt) {
  const auto anat = load_anatomies(cfg, manifest, opt);
  require_anatomies(anat);
  const fs::path root = manifest.root();
  eval::AggregateReport report;
  run_stage(manifest, "ablate-aug", [&] {
    std::vector<std::string> artifacts;
    std::vector<eval::EpisodeMetrics> all;
    // Both arms share every seed; only the augment flag differs.
    const std::uint64_t seed = derive_seed(cfg.seed, kAblationStream);
    for (bool augment : {true, false}) {
      const std::string model = augment ? "tdmpc2_aug" : "tdmpc2_noaug";
      auto episode = cfg.episode;
      episode.augment = augment;
      JsonLog curve, episodes;
      auto agent = train_agent(cfg, Algo::Tdmpc2, anat, episode, seed, root, curve, episodes, opt);
      const fs::path dir = "ablation";
      const auto ckpt = dir / (model + ".ckpt");
      const auto curve_path = dir / (model + "_curve.jsonl");
      const auto ep_path = dir / (model + "_episodes.jsonl");
      save_agent(*agent, root / ckpt);
      curve.write(root / curve_path);
      episodes.write(root / ep_path);
      for (const auto& p : {ckpt, curve_path, ep_path}) artifacts.push_back(p.generic_string());
      auto m = evaluate_model(cfg, *agent, model, anat);
      all.insert(all.end(), m.begin(), m.end());
    }
    report = eval::aggregate(all);
    eval::compare(report, "tdmpc2_aug", "tdmpc2_noaug");
    const fs::path json_path = "ablation/report.json", csv_path = "ablation/report.csv";
    eval::write_report(report, root / json_path, eval::ReportFormat::Json);
    eval::write_report(report, root / csv_path, eval::ReportFormat::Csv);
    artifacts.push_back(json_path.generic_string());
    artifacts.push_back(csv_path.generic_string());
    manifest.set_seed("ablate-aug", seed);
    return artifacts;
  });
  check_holdout_discipline(manifest);
  return report;
}

void report(const RunConfig&, Manifest& manifest, const StageOptions& opt) {
  const fs::path root = manifest.root();
  run_stage(manifest, "report", [&] {
    std::vector<std::string> artifacts;
    const std::vector<std::tuple<fs::path, std::string, std::string, std::string>> sources = {
        {paths::eval_report_json(), "tdmpc2", "sac", "report/eval_table.md"},
        {"ablation/report.json", "tdmpc2_aug", "tdmpc2_noaug", "report/ablation_table.md"}};
    for (const auto& [src, a, b, dst] : sources) {
      if (!fs::exists(root / src)) continue;
      std::ifstream in(root / src);
      auto rep = eval::aggregate(eval::episodes_from_json(json::parse(in)));
      eval::compare(rep, a, b);
      write_atomic(root / dst, [&](std::ostream& out) {
        out << "| task | model | n |";
        for (auto m : eval::kMetricNames) out << ' ' << m << " |";
        out << "\n|---|---|---|";
        for (std::size_t i = 0; i < eval::kMetricNames.size(); ++i) out << "---|";
        out << '\n';
        for (const auto& c : rep.cells) {
          const eval::Comparison* cmp = nullptr;
          for (const auto& x : rep.comparisons)
            if (x.task == c.task && x.model_a == c.model) cmp = &x;
          out << "| " << env::to_string(c.task) << " | " << c.model << " | " << c.episodes << " |";
          const std::array<const eval::MeanStd*, 7> vals = {&c.success,   &c.procedure_time, &c.path_ratio,
                                                            &c.force_mean, &c.force_max,      &c.speed_mean,
                                                            &c.speed_max};
          for (std::size_t i = 0; i < vals.size(); ++i) {
            if (vals[i]->n == 0) {
              out << " - |";
              continue;
            }
            out << ' ' << std::setprecision(3) << vals[i]->mean << " ± " << vals[i]->std;
            if (cmp) out << eval::stars(cmp->tests.at(std::string(eval::kMetricNames[i])).p);
            out << " |";
          }
          out << '\n';
        }
      });
      artifacts.push_back(dst);
      say(opt, "report: wrote " + dst);
    }
    if (artifacts.empty()) throw std::runtime_error("no evaluation reports to summarise; run eval first");
    return artifacts;
  });
}

void check_holdout_discipline(const Manifest& manifest) {
  const auto ids = manifest.anatomies();
  if (!ids) return;
  const std::set<std::string> holdout(ids->second.begin(), ids->second.end());
  const fs::path root = manifest.root();
  const auto check = [&](const std::string& vasc, const std::string& where) {
    if (holdout.count(vasc))
      throw std::runtime_error("hold-out anatomy '" + vasc + "' appears in training log '" + where + "'");
  };
  for (const auto& a : manifest.artifacts()) {
    const fs::path p = root / a;
    if (!fs::exists(p)) continue;
    if (p.extension() == ".replay") {
      for (const auto& ep : replay::read_episodes(p)) check(ep.vasculature, a);
    } else if (p.filename().string().ends_with("episodes.jsonl")) {
      std::ifstream in(p);
      for (std::string line; std::getline(in, line);)
        if (!line.empty()) check(json::parse(line).at("vasculature").get<std::string>(), a);
    }
  }
}

}  // namespace endonav::pipeline
