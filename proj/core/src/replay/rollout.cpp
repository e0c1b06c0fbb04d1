#include "endonav/replay/rollout.hpp"

#include "endonav/errors.hpp"

namespace endonav::replay {

Rollout collect_episode(env::Environment& environment, env::Policy& policy,
                        const env::TaskSpec& task, const std::string& vasculature, Rng& rng,
                        bool deterministic) {
  Rollout out;
  out.record.task = task.id;
  out.record.vasculature = vasculature;
  out.record.observations.push_back(environment.reset(task, rng));
  if (const auto* nav = dynamic_cast<const env::NavEnv*>(&environment)) out.record.augment = nav->augment_params();
  out.initial_pathlength = environment.pathlength();
  policy.begin_episode(task.id);
  while (true) {
    const env::Action a = env::clamp_action(policy.act(out.record.observations.back(), deterministic, rng));
    const env::StepResult r = environment.step(a);
    out.record.actions.push_back(a);
    out.record.rewards.push_back(r.reward);
    out.record.observations.push_back(r.obs);
    out.infos.push_back(r.info);
    if (r.terminated || r.truncated) {
      out.record.terminated = r.terminated;
      out.record.truncated = r.truncated;
      break;
    }
    if (out.record.actions.size() >= kMaxEpisodeTransitions) {
      out.record.truncated = true;
      break;
    }
  }
  return out;
}

env::Action RandomPolicy::act(const env::Observation&, bool, Rng& rng) {
  env::Action a;
  for (double& v : a) v = rng.uniform(-1.0, 1.0);
  return a;
}

TrainProgress train_loop(Learner& learner, const std::vector<TrainSlot>& slots,
                         ReplayBuffer& buffer, const TrainLoopConfig& cfg, Rng& rng,
                         const std::function<void(const TrainProgress&)>& on_log,
                         const std::function<void(const EpisodeRecord&)>& on_episode) {
  if (slots.empty()) throw ArgumentError("train_loop needs at least one environment");
  for (const auto& s : slots)
    if (!s.environment || s.tasks.empty()) throw ArgumentError("train slot without environment or tasks");
  if (cfg.update_every == 0) throw ArgumentError("update_every must be positive");

  TrainProgress progress;
  RandomPolicy random;
  std::size_t window_episodes = 0;
  std::size_t window_success = 0;
  double window_return = 0.0;
  std::size_t next_log = cfg.log_every;

  while (progress.env_steps < cfg.env_steps) {
    const TrainSlot& slot = slots[rng.below(slots.size())];
    const env::TaskSpec& task = slot.tasks[rng.below(slot.tasks.size())];
    env::Observation obs = slot.environment->reset(task, rng);
    EpisodeRecord ep;
    ep.task = task.id;
    ep.vasculature = slot.vasculature;
    if (const auto* nav = dynamic_cast<const env::NavEnv*>(slot.environment)) ep.augment = nav->augment_params();
    ep.observations.push_back(obs);
    learner.begin_episode(task.id);
    random.begin_episode(task.id);

    while (true) {
      const bool warm = progress.env_steps < cfg.warmup_steps;
      env::Policy& actor = warm ? static_cast<env::Policy&>(random) : learner;
      const env::Action a = env::clamp_action(actor.act(obs, false, rng));
      const env::StepResult r = slot.environment->step(a);
      ep.actions.push_back(a);
      ep.rewards.push_back(r.reward);
      ep.observations.push_back(r.obs);
      obs = r.obs;
      ++progress.env_steps;

      if (!warm && buffer.transitions() > 0 && progress.env_steps % cfg.update_every == 0) {
        for (std::size_t u = 0; u < cfg.updates_per_round; ++u) {
          const SequenceBatch batch =
              buffer.sample_sequences(learner.batch_size(), learner.sequence_length(), rng);
          progress.last_losses = learner.update(batch, rng);
          ++progress.updates;
        }
      }

      const bool done = r.terminated || r.truncated || ep.actions.size() >= kMaxEpisodeTransitions;
      if (done) {
        ep.terminated = r.terminated;
        ep.truncated = !r.terminated;
        break;
      }
      if (progress.env_steps >= cfg.env_steps) {
        ep.truncated = true;
        break;
      }
    }

    double ret = 0.0;
    for (double x : ep.rewards) ret += x;
    ++progress.episodes;
    ++window_episodes;
    window_success += ep.terminated ? 1 : 0;
    window_return += ret;
    if (on_episode) on_episode(ep);
    buffer.push_episode(std::move(ep));

    if (on_log && cfg.log_every > 0 && progress.env_steps >= next_log) {
      progress.recent_success = static_cast<double>(window_success) / static_cast<double>(window_episodes);
      progress.recent_return = window_return / static_cast<double>(window_episodes);
      on_log(progress);
      window_episodes = 0;
      window_success = 0;
      window_return = 0.0;
      while (next_log <= progress.env_steps) next_log += cfg.log_every;
    }
  }
  return progress;
}

}  // namespace endonav::replay
