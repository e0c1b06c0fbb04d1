#include "endonav/pipeline/run_config.hpp"

#include <fstream>
#include <set>

#include "endonav/errors.hpp"
#include "endonav/vessel/synthetic.hpp"

namespace endonav::pipeline {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_index_list(const json& j, const char* key, std::vector<Eigen::Index>& out) {
  if (!j.contains(key)) return;
  out.clear();
  for (const auto& v : j.at(key)) out.push_back(v.get<Eigen::Index>());
}

void read_loop(const json& j, const std::string& where, replay::TrainLoopConfig& loop) {
  check_keys(j, where, {"env_steps", "warmup_steps", "update_every", "updates_per_round", "log_every"});
  read(j, "env_steps", loop.env_steps);
  read(j, "warmup_steps", loop.warmup_steps);
  read(j, "update_every", loop.update_every);
  read(j, "updates_per_round", loop.updates_per_round);
  read(j, "log_every", loop.log_every);
}

json loop_json(const replay::TrainLoopConfig& l) {
  return {{"env_steps", l.env_steps}, {"warmup_steps", l.warmup_steps}, {"update_every", l.update_every},
          {"updates_per_round", l.updates_per_round}, {"log_every", l.log_every}};
}

void read_device(const json& j, const std::string& where, sim::DeviceParams& d) {
  check_keys(j, where, {"outer_diameter", "tip_bend_angle_deg", "tip_segment_length", "wall_stiffness",
                        "tangent_blend"});
  read(j, "outer_diameter", d.outer_diameter);
  if (j.contains("tip_bend_angle_deg")) d.tip_bend_angle = j.at("tip_bend_angle_deg").get<double>() * vessel::kDeg;
  read(j, "tip_segment_length", d.tip_segment_length);
  read(j, "wall_stiffness", d.wall_stiffness);
  read(j, "tangent_blend", d.tangent_blend);
}

json device_json(const sim::DeviceParams& d) {
  return {{"outer_diameter", d.outer_diameter}, {"tip_bend_angle_deg", d.tip_bend_angle / vessel::kDeg},
          {"tip_segment_length", d.tip_segment_length}, {"wall_stiffness", d.wall_stiffness},
          {"tangent_blend", d.tangent_blend}};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  try {
    check_keys(doc, "config", {"seed", "output_dir", "anatomy", "episode", "devices", "tasks", "sac", "tdmpc2",
                               "pretrain", "prefill_episodes", "prefill_deterministic", "train",
                               "replay_capacity", "eval_episodes"});
    read(doc, "seed", cfg.seed);
    if (doc.contains("output_dir")) cfg.output_dir = resolve(base_dir, doc.at("output_dir").get<std::string>());

    if (doc.contains("anatomy")) {
      const json& a = doc.at("anatomy");
      check_keys(a, "anatomy", {"kind", "count", "holdout", "train_files", "holdout_files"});
      if (a.contains("kind")) {
        const auto kind = a.at("kind").get<std::string>();
        if (kind == "aortic")
          cfg.anatomy.kind = AnatomyKind::Aortic;
        else if (kind == "bifurcation")
          cfg.anatomy.kind = AnatomyKind::Bifurcation;
        else
          throw ConfigError("anatomy.kind must be 'aortic' or 'bifurcation', got '" + kind + "'");
      }
      read(a, "count", cfg.anatomy.count);
      read(a, "holdout", cfg.anatomy.holdout);
      if (a.contains("train_files"))
        for (const auto& f : a.at("train_files")) cfg.anatomy.train_files.push_back(resolve(base_dir, f.get<std::string>()));
      if (a.contains("holdout_files"))
        for (const auto& f : a.at("holdout_files")) cfg.anatomy.holdout_files.push_back(resolve(base_dir, f.get<std::string>()));
    }

    if (doc.contains("episode")) {
      const json& e = doc.at("episode");
      check_keys(e, "episode", {"max_steps", "success_radius", "augment", "dt"});
      read(e, "max_steps", cfg.episode.max_steps);
      read(e, "success_radius", cfg.episode.success_radius);
      read(e, "augment", cfg.episode.augment);
      read(e, "dt", cfg.episode.dt);
    }
    if (doc.contains("devices")) {
      const json& d = doc.at("devices");
      check_keys(d, "devices", {"guidewire", "catheter"});
      if (d.contains("guidewire")) read_device(d.at("guidewire"), "devices.guidewire", cfg.episode.sim.guidewire);
      if (d.contains("catheter")) read_device(d.at("catheter"), "devices.catheter", cfg.episode.sim.catheter);
    }
    if (doc.contains("tasks")) {
      cfg.tasks.clear();
      for (const auto& t : doc.at("tasks")) cfg.tasks.push_back(env::task_from_string(t.get<std::string>()));
    }

    if (doc.contains("sac")) {
      const json& s = doc.at("sac");
      check_keys(s, "sac", {"lstm_hidden", "hidden", "gamma", "tau", "lr", "entropy_target", "init_alpha", "batch",
                            "seq_len", "grad_clip"});
      read(s, "lstm_hidden", cfg.sac.lstm_hidden);
      read_index_list(s, "hidden", cfg.sac.hidden);
      read(s, "gamma", cfg.sac.gamma);
      read(s, "tau", cfg.sac.tau);
      read(s, "lr", cfg.sac.lr);
      read(s, "entropy_target", cfg.sac.entropy_target);
      read(s, "init_alpha", cfg.sac.init_alpha);
      read(s, "batch", cfg.sac.batch);
      read(s, "seq_len", cfg.sac.seq_len);
      read(s, "grad_clip", cfg.sac.grad_clip);
    }
    if (doc.contains("tdmpc2")) {
      const json& t = doc.at("tdmpc2");
      check_keys(t, "tdmpc2", {"lstm_hidden", "latent", "hidden", "task_dim", "ensemble", "horizon", "iterations",
                               "samples", "elites", "policy_samples", "temperature", "min_std", "max_std",
                               "gamma", "tau", "lr", "rho", "consistency_coef", "reward_coef", "value_coef",
                               "entropy_coef", "batch", "seq_len", "grad_clip"});
      auto& m = cfg.tdmpc2;
      read(t, "lstm_hidden", m.model.lstm_hidden);
      read(t, "latent", m.model.latent);
      read_index_list(t, "hidden", m.model.hidden);
      read(t, "task_dim", m.model.task_dim);
      read(t, "ensemble", m.model.ensemble);
      read(t, "horizon", m.plan.horizon);
      read(t, "iterations", m.plan.iterations);
      read(t, "samples", m.plan.samples);
      read(t, "elites", m.plan.elites);
      read(t, "policy_samples", m.plan.policy_samples);
      read(t, "temperature", m.plan.temperature);
      read(t, "min_std", m.plan.min_std);
      read(t, "max_std", m.plan.max_std);
      if (t.contains("gamma")) {
        m.loss.gamma = t.at("gamma").get<double>();
        m.plan.gamma = m.loss.gamma;
      }
      read(t, "tau", m.tau);
      read(t, "lr", m.lr);
      read(t, "rho", m.loss.rho);
      read(t, "consistency_coef", m.loss.consistency);
      read(t, "reward_coef", m.loss.reward);
      read(t, "value_coef", m.loss.value);
      read(t, "entropy_coef", m.loss.entropy);
      read(t, "batch", m.batch);
      read(t, "seq_len", m.seq_len);
      read(t, "grad_clip", m.grad_clip);
      m.plan.init_std = m.plan.max_std;
    }
    if (doc.contains("pretrain")) read_loop(doc.at("pretrain"), "pretrain", cfg.pretrain);
    read(doc, "prefill_episodes", cfg.prefill_episodes);
    read(doc, "prefill_deterministic", cfg.prefill_deterministic);
    if (doc.contains("train")) read_loop(doc.at("train"), "train", cfg.train);
    read(doc, "replay_capacity", cfg.replay_capacity);
    read(doc, "eval_episodes", cfg.eval_episodes);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

json to_json(const RunConfig& c) {
  json tasks = json::array();
  for (auto t : c.tasks) tasks.push_back(env::to_string(t));
  json train_files = json::array(), holdout_files = json::array();
  for (const auto& f : c.anatomy.train_files) train_files.push_back(f.string());
  for (const auto& f : c.anatomy.holdout_files) holdout_files.push_back(f.string());
  const auto& t = c.tdmpc2;
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir.string()},
      {"anatomy",
       {{"kind", c.anatomy.kind == AnatomyKind::Aortic ? "aortic" : "bifurcation"},
        {"count", c.anatomy.count},
        {"holdout", c.anatomy.holdout},
        {"train_files", train_files},
        {"holdout_files", holdout_files}}},
      {"episode",
       {{"max_steps", c.episode.max_steps},
        {"success_radius", c.episode.success_radius},
        {"augment", c.episode.augment},
        {"dt", c.episode.dt}}},
      {"devices", {{"guidewire", device_json(c.episode.sim.guidewire)}, {"catheter", device_json(c.episode.sim.catheter)}}},
      {"tasks", tasks},
      {"sac",
       {{"lstm_hidden", c.sac.lstm_hidden}, {"hidden", c.sac.hidden}, {"gamma", c.sac.gamma}, {"tau", c.sac.tau},
        {"lr", c.sac.lr}, {"entropy_target", c.sac.entropy_target}, {"init_alpha", c.sac.init_alpha},
        {"batch", c.sac.batch}, {"seq_len", c.sac.seq_len}, {"grad_clip", c.sac.grad_clip}}},
      {"tdmpc2",
       {{"lstm_hidden", t.model.lstm_hidden}, {"latent", t.model.latent}, {"hidden", t.model.hidden},
        {"task_dim", t.model.task_dim}, {"ensemble", t.model.ensemble}, {"horizon", t.plan.horizon},
        {"iterations", t.plan.iterations}, {"samples", t.plan.samples}, {"elites", t.plan.elites},
        {"policy_samples", t.plan.policy_samples}, {"temperature", t.plan.temperature},
        {"min_std", t.plan.min_std}, {"max_std", t.plan.max_std}, {"gamma", t.loss.gamma}, {"tau", t.tau},
        {"lr", t.lr}, {"rho", t.loss.rho}, {"consistency_coef", t.loss.consistency},
        {"reward_coef", t.loss.reward}, {"value_coef", t.loss.value}, {"entropy_coef", t.loss.entropy},
        {"batch", t.batch}, {"seq_len", t.seq_len}, {"grad_clip", t.grad_clip}}},
      {"pretrain", loop_json(c.pretrain)},
      {"prefill_episodes", c.prefill_episodes},
      {"prefill_deterministic", c.prefill_deterministic},
      {"train", loop_json(c.train)},
      {"replay_capacity", c.replay_capacity},
      {"eval_episodes", c.eval_episodes}};
}

void validate(const RunConfig& c) {
  try {
    if (c.tasks.empty()) throw ConfigError("tasks must not be empty");
    if (c.anatomy.from_files()) {
      if (c.anatomy.train_files.empty() || c.anatomy.holdout_files.empty())
        throw ConfigError("anatomy files need both train_files and holdout_files");
      std::set<std::string> seen;
      for (const auto& f : c.anatomy.train_files) {
        if (!std::filesystem::exists(f)) throw ConfigError("anatomy file '" + f.string() + "' does not exist");
        seen.insert(std::filesystem::weakly_canonical(f).string());
      }
      for (const auto& f : c.anatomy.holdout_files) {
        if (!std::filesystem::exists(f)) throw ConfigError("anatomy file '" + f.string() + "' does not exist");
        if (seen.count(std::filesystem::weakly_canonical(f).string()))
          throw ConfigError("anatomy file '" + f.string() + "' is both training and hold-out");
      }
    } else if (c.anatomy.count > 0 && c.anatomy.holdout >= c.anatomy.count) {
      throw ConfigError("anatomy.holdout must be smaller than anatomy.count");
    }
    if (c.episode.max_steps == 0 || c.episode.max_steps > replay::kMaxEpisodeTransitions)
      throw ConfigError("episode.max_steps must lie in [1, 200]");
    if (!(c.episode.success_radius > 0.0)) throw ConfigError("episode.success_radius must be positive");
    if (!(c.episode.dt > 0.0)) throw ConfigError("episode.dt must be positive");
    sim::validate(c.episode.sim.guidewire);
    sim::validate(c.episode.sim.catheter);
    sac::validate(c.sac);
    tdmpc2::validate(c.tdmpc2);
    if (c.replay_capacity == 0) throw ConfigError("replay_capacity must be positive");
    if (c.pretrain.update_every == 0 || c.train.update_every == 0) throw ConfigError("update_every must be positive");
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace endonav::pipeline
