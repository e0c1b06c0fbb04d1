#include "endonav/tdmpc2/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "endonav/errors.hpp"

namespace endonav::tdmpc2 {
namespace {

constexpr auto kA = static_cast<Eigen::Index>(env::kActionDim);

Action to_action(const Eigen::VectorXd& v, Eigen::Index offset) {
  Action a;
  for (Eigen::Index i = 0; i < kA; ++i) a[static_cast<std::size_t>(i)] = v[offset + i];
  return a;
}

}  // namespace

void validate(const PlanConfig& cfg) {
  if (cfg.horizon == 0) throw ArgumentError("plan: horizon must be >= 1");
  if (cfg.iterations == 0) throw ArgumentError("plan: iterations must be >= 1");
  if (cfg.samples + cfg.policy_samples == 0) throw ArgumentError("plan: no samples");
  if (cfg.elites == 0 || cfg.elites > cfg.samples + cfg.policy_samples)
    throw ArgumentError("plan: elites must lie in [1, samples + policy_samples]");
  if (!(cfg.temperature > 0.0)) throw ArgumentError("plan: temperature must be positive");
  if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0)) throw ArgumentError("plan: gamma must lie in (0, 1]");
  if (!(cfg.min_std >= 0.0 && cfg.min_std <= cfg.max_std)) throw ArgumentError("plan: bad std bounds");
  if (!(cfg.init_std >= 0.0)) throw ArgumentError("plan: init_std must be >= 0");
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> refit(const Matrix& actions, const Eigen::VectorXd& scores,
                                                  double temperature, double min_std, double max_std) {
  const double best = scores.maxCoeff();
  Eigen::VectorXd w = ((scores.array() - best) / temperature).exp().matrix();
  w /= w.sum();
  const Eigen::VectorXd mean = actions * w;
  const Matrix centered = actions.colwise() - mean;
  Eigen::VectorXd var = centered.array().square().matrix() * w;
  Eigen::VectorXd std = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(min_std).cwiseMin(max_std);
  return {mean, std};
}

Eigen::VectorXd evaluate_sequences(const LatentModel& model, const Eigen::VectorXd& z,
                                   const Matrix& actions, std::size_t horizon, double gamma,
                                   TaskId task, Rng& rng) {
  const Eigen::Index n = actions.cols();
  Matrix zs = z.replicate(1, n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  double discount = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    const Matrix a = actions.middleRows(static_cast<Eigen::Index>(t) * kA, kA);
    g += discount * model.reward(zs, a, task).row(0).transpose();
    zs = model.next(zs, a, task);
    discount *= gamma;
  }
  const Matrix a_end = model.policy(zs, task, rng);
  g += discount * model.value(zs, a_end, task, rng).row(0).transpose();
  return g;
}

PlanResult plan(const LatentModel& model, const Eigen::VectorXd& z, TaskId task,
                const PlanConfig& cfg, const PlanResult* prev, Rng& rng, bool deterministic) {
  validate(cfg);
  const auto H = static_cast<Eigen::Index>(cfg.horizon);
  const Eigen::Index D = H * kA;
  const auto n_pi = static_cast<Eigen::Index>(cfg.policy_samples);
  const auto n_s = static_cast<Eigen::Index>(cfg.samples);
  const auto K = static_cast<Eigen::Index>(cfg.elites);

  // Policy-prior trajectories, fixed across iterations.
  Matrix pi_actions(D, n_pi);
  if (n_pi > 0) {
    Matrix zs = z.replicate(1, n_pi);
    for (Eigen::Index t = 0; t < H; ++t) {
      const Matrix a = model.policy(zs, task, rng);
      pi_actions.middleRows(t * kA, kA) = a;
      if (t + 1 < H) zs = model.next(zs, a, task);
    }
  }

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(D);
  if (prev && static_cast<Eigen::Index>(prev->mean.size()) >= 1) {
    const auto P = static_cast<Eigen::Index>(prev->mean.size());
    for (Eigen::Index t = 0; t + 1 < std::min(P, H + 1); ++t)
      for (Eigen::Index i = 0; i < kA; ++i)
        mean[t * kA + i] = prev->mean[static_cast<std::size_t>(t + 1)][static_cast<std::size_t>(i)];
  }
  Eigen::VectorXd std = Eigen::VectorXd::Constant(D, cfg.init_std);

  PlanResult out;
  for (Eigen::Index t = 0; t < H; ++t) out.init_mean.push_back(to_action(mean, t * kA));

  Matrix all(D, n_pi + n_s);
  all.leftCols(n_pi) = pi_actions;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    for (Eigen::Index j = 0; j < n_s; ++j)
      for (Eigen::Index i = 0; i < D; ++i)
        all(i, n_pi + j) = std::clamp(mean[i] + std[i] * rng.normal(), -1.0, 1.0);

    const Eigen::VectorXd g = evaluate_sequences(model, z, all, cfg.horizon, cfg.gamma, task, rng);
    if (!g.allFinite())
      throw NumericError("planner: non-finite sequence score at iteration " + std::to_string(it));

    std::vector<Eigen::Index> order(static_cast<std::size_t>(all.cols()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::partial_sort(order.begin(), order.begin() + K, order.end(),
                      [&](Eigen::Index a, Eigen::Index b) { return g[a] > g[b]; });
    Matrix elite(D, K);
    Eigen::VectorXd elite_g(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      elite.col(k) = all.col(order[static_cast<std::size_t>(k)]);
      elite_g[k] = g[order[static_cast<std::size_t>(k)]];
    }
    std::tie(mean, std) = refit(elite, elite_g, cfg.temperature, cfg.min_std, cfg.max_std);
    Eigen::VectorXd w = ((elite_g.array() - elite_g.maxCoeff()) / cfg.temperature).exp().matrix();
    out.predicted_return = w.dot(elite_g) / w.sum();
  }

  for (Eigen::Index t = 0; t < H; ++t) {
    out.mean.push_back(to_action(mean, t * kA));
    out.std.push_back(to_action(std, t * kA));
  }
  out.action = out.mean[0];
  if (!deterministic)
    for (std::size_t i = 0; i < env::kActionDim; ++i)
      out.action[i] = std::clamp(out.action[i] + out.std[0][i] * rng.normal(), -1.0, 1.0);
  return out;
}

double policy_prior_return(const LatentModel& model, const Eigen::VectorXd& z, TaskId task,
                           std::size_t horizon, double gamma, std::size_t rollouts, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(rollouts);
  const auto H = static_cast<Eigen::Index>(horizon);
  Matrix actions(H * kA, n);
  Matrix zs = z.replicate(1, n);
  for (Eigen::Index t = 0; t < H; ++t) {
    const Matrix a = model.policy(zs, task, rng);
    actions.middleRows(t * kA, kA) = a;
    zs = model.next(zs, a, task);
  }
  return evaluate_sequences(model, z, actions, horizon, gamma, task, rng).mean();
}

}  // namespace endonav::tdmpc2
