#include "endonav/eval/evaluate.hpp"

#include <algorithm>
#include <tuple>

#include "endonav/errors.hpp"

namespace endonav::eval {
namespace {

using Key = std::tuple<std::size_t, std::string, std::uint64_t>;

Key key_of(const EpisodeMetrics& m) { return {env::task_index(m.task), m.vasculature, m.seed}; }

double metric(const EpisodeMetrics& m, std::string_view name) {
  if (name == "success") return m.success ? 100.0 : 0.0;
  if (name == "procedure_time") return m.procedure_time.value_or(0.0);
  if (name == "path_ratio") return 100.0 * m.path_ratio.value_or(0.0);
  if (name == "force_mean") return m.tip_force_mean;
  if (name == "force_max") return m.tip_force_max;
  if (name == "speed_mean") return m.tip_speed_mean;
  return m.tip_speed_max;
}

// Whether an episode pair contributes to a metric's paired test.
bool usable(const EpisodeMetrics& a, const EpisodeMetrics& b, std::string_view name) {
  if (name == "procedure_time") return a.success && b.success;
  if (name == "path_ratio") return !a.success && !b.success;
  return true;
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t base, std::size_t cell, std::size_t episode) {
  return derive_seed(derive_seed(base, cell), episode);
}

std::vector<EpisodeMetrics> evaluate(env::Policy& policy, const std::string& model,
                                     const std::vector<EvalCell>& cells,
                                     std::size_t episodes_per_cell, std::uint64_t seed) {
  std::vector<EpisodeMetrics> out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const EvalCell& cell = cells[c];
    if (!cell.environment) throw ArgumentError("evaluation cell without environment");
    for (std::size_t k = 0; k < episodes_per_cell; ++k) {
      const std::uint64_t s = episode_seed(seed, c, k);
      Rng rng(s);
      const replay::Rollout r =
          replay::collect_episode(*cell.environment, policy, cell.task, cell.vasculature, rng, true);
      EpisodeMetrics m = episode_metrics(r, cell.environment->dt());
      m.model = model;
      m.seed = s;
      out.push_back(std::move(m));
    }
  }
  return out;
}

AggregateReport aggregate(const std::vector<EpisodeMetrics>& episodes) {
  AggregateReport report;
  report.episodes = episodes;
  std::vector<std::string> models;
  for (const auto& e : episodes)
    if (std::find(models.begin(), models.end(), e.model) == models.end()) models.push_back(e.model);

  for (env::TaskId task : env::kAllTasks) {
    for (const auto& model : models) {
      std::vector<double> success, time, ratio, fmean, fmax, smean, smax;
      for (const auto& e : episodes) {
        if (e.task != task || e.model != model) continue;
        success.push_back(e.success ? 100.0 : 0.0);
        if (e.procedure_time) time.push_back(*e.procedure_time);
        if (e.path_ratio) ratio.push_back(100.0 * *e.path_ratio);
        fmean.push_back(e.tip_force_mean);
        fmax.push_back(e.tip_force_max);
        smean.push_back(e.tip_speed_mean);
        smax.push_back(e.tip_speed_max);
      }
      if (success.empty()) continue;
      CellSummary c;
      c.task = task;
      c.model = model;
      c.episodes = success.size();
      c.success = mean_std(success);
      c.procedure_time = mean_std(time);
      c.path_ratio = mean_std(ratio);
      c.force_mean = mean_std(fmean);
      c.force_max = mean_std(fmax);
      c.speed_mean = mean_std(smean);
      c.speed_max = mean_std(smax);
      report.cells.push_back(c);
    }
  }
  return report;
}

void compare(AggregateReport& report, const std::string& model_a, const std::string& model_b) {
  for (env::TaskId task : env::kAllTasks) {
    std::map<Key, const EpisodeMetrics*> a, b;
    for (const auto& e : report.episodes) {
      if (e.task != task) continue;
      if (e.model == model_a) a[key_of(e)] = &e;
      if (e.model == model_b) b[key_of(e)] = &e;
    }
    if (a.empty() && b.empty()) continue;
    if (a.size() != b.size())
      throw PairingError("task " + std::string(env::to_string(task)) + ": " + model_a + " has " +
                         std::to_string(a.size()) + " episodes, " + model_b + " has " +
                         std::to_string(b.size()));
    for (const auto& [k, ea] : a)
      if (!b.count(k))
        throw PairingError("task " + std::string(env::to_string(task)) + ": episode on '" +
                           std::get<1>(k) + "' seed " + std::to_string(std::get<2>(k)) +
                           " has no counterpart for " + model_b);

    Comparison cmp;
    cmp.task = task;
    cmp.model_a = model_a;
    cmp.model_b = model_b;
    for (std::string_view name : kMetricNames) {
      std::vector<double> xa, xb;
      for (const auto& [k, ea] : a) {
        const EpisodeMetrics* eb = b.at(k);
        if (!usable(*ea, *eb, name)) continue;
        xa.push_back(metric(*ea, name));
        xb.push_back(metric(*eb, name));
      }
      cmp.tests[std::string(name)] = paired_t_test(xa, xb);
    }
    report.comparisons.push_back(std::move(cmp));
  }
}

}  // namespace endonav::eval
