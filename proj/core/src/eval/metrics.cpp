#include "endonav/eval/metrics.hpp"

#include <algorithm>
#include <vector>

#include "endonav/errors.hpp"

namespace endonav::eval {
namespace {

std::pair<double, double> mean_max(std::span<const double> v, const char* what) {
  if (v.empty()) throw ArgumentError(std::string(what) + ": empty episode");
  double sum = 0.0;
  double best = v.front();
  for (double x : v) {
    sum += x;
    best = std::max(best, x);
  }
  return {sum / static_cast<double>(v.size()), best};
}

}  // namespace

double path_ratio(double initial_path, double final_path) {
  if (!(initial_path > 0.0)) throw ArgumentError("path_ratio: initial pathlength must be positive");
  return std::clamp((initial_path - final_path) / initial_path, 0.0, 1.0);
}

std::pair<double, double> force_stats(std::span<const double> forces) {
  return mean_max(forces, "force_stats");
}

std::pair<double, double> speed_stats(std::span<const double> displacements, double dt) {
  if (!(dt > 0.0)) throw ArgumentError("speed_stats: dt must be positive");
  std::vector<double> speeds(displacements.begin(), displacements.end());
  for (double& s : speeds) s /= dt;
  return mean_max(speeds, "speed_stats");
}

EpisodeMetrics episode_metrics(const replay::Rollout& rollout, double dt) {
  if (rollout.infos.empty()) throw ArgumentError("episode_metrics: episode has no steps");
  EpisodeMetrics m;
  m.task = rollout.record.task;
  m.vasculature = rollout.record.vasculature;
  m.success = rollout.record.terminated;
  m.steps = rollout.infos.size();
  m.initial_pathlength = rollout.initial_pathlength;
  m.final_pathlength = rollout.infos.back().pathlength;
  std::vector<double> forces, speeds;
  for (const auto& info : rollout.infos) {
    forces.push_back(info.tip_force);
    speeds.push_back(info.tip_speed);
  }
  std::tie(m.tip_force_mean, m.tip_force_max) = force_stats(forces);
  std::tie(m.tip_speed_mean, m.tip_speed_max) = mean_max(speeds, "speed_stats");
  if (m.success)
    m.procedure_time = static_cast<double>(m.steps) * dt;
  else
    m.path_ratio = m.initial_pathlength > 0.0 ? path_ratio(m.initial_pathlength, m.final_pathlength) : 0.0;
  return m;
}

}  // namespace endonav::eval
