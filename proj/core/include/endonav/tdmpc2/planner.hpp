#pragma once

// Sampling-based trajectory optimisation in a learned latent space. The
// planner only sees the LatentModel interface, so it can be exercised on
// hand-written models as well as on the trained world model.

#include <Eigen/Core>

#include <vector>

#include "endonav/env/nav_env.hpp"
#include "endonav/rng.hpp"

namespace endonav::tdmpc2 {

using Matrix = Eigen::MatrixXd;
using env::Action;
using env::TaskId;

class LatentModel {
 public:
  virtual ~LatentModel() = default;
  // All calls are batched over columns: z is (latent x N), a is (4 x N).
  virtual Matrix next(const Matrix& z, const Matrix& a, TaskId task) const = 0;
  virtual Matrix reward(const Matrix& z, const Matrix& a, TaskId task) const = 0;  // (1 x N)
  // Terminal value estimate; implementations may subsample critics with rng.
  virtual Matrix value(const Matrix& z, const Matrix& a, TaskId task, Rng& rng) const = 0;
  // Sampled policy-prior actions in [-1, 1], (4 x N).
  virtual Matrix policy(const Matrix& z, TaskId task, Rng& rng) const = 0;
};

struct PlanConfig {
  std::size_t horizon = 3;
  std::size_t iterations = 6;
  std::size_t samples = 512;
  std::size_t elites = 64;
  std::size_t policy_samples = 24;
  double temperature = 2.0;  // elite weights exp((G - G_max) / temperature)
  double gamma = 0.99;
  double init_std = 2.0;
  double min_std = 0.05;
  double max_std = 2.0;
};

// Throws ArgumentError.
void validate(const PlanConfig& cfg);

struct PlanResult {
  Action action{};
  std::vector<Action> init_mean;  // H: the mean the search started from
  std::vector<Action> mean;       // H: final elite-weighted mean
  std::vector<Action> std;        // H
  double predicted_return = 0.0;  // weighted elite return of the last iteration
};

// Elite-weighted refit over the columns of `actions` (one flattened H*4
// sequence per column). Returns (mean, std), std clamped to [min_std, max_std].
std::pair<Eigen::VectorXd, Eigen::VectorXd> refit(const Matrix& actions, const Eigen::VectorXd& scores,
                                                  double temperature, double min_std, double max_std);

// Discounted latent return of action sequences (flattened H*4 per column).
Eigen::VectorXd evaluate_sequences(const LatentModel& model, const Eigen::VectorXd& z,
                                   const Matrix& actions, std::size_t horizon, double gamma,
                                   TaskId task, Rng& rng);

// Warm-started from `prev` shifted by one step (zero padded) when given.
// With `deterministic` the first action of the final mean is returned,
// otherwise it is perturbed by the final std. Throws NumericError when a
// score is not finite.
PlanResult plan(const LatentModel& model, const Eigen::VectorXd& z, TaskId task,
                const PlanConfig& cfg, const PlanResult* prev, Rng& rng, bool deterministic);

// Return of following the policy prior alone (one rollout, mean over `rollouts`).
double policy_prior_return(const LatentModel& model, const Eigen::VectorXd& z, TaskId task,
                           std::size_t horizon, double gamma, std::size_t rollouts, Rng& rng);

}  // namespace endonav::tdmpc2
