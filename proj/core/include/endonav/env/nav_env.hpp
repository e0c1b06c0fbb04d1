#pragma once

// Multi-task navigation environment around the device simulator. Agents see
// only 2-D fluoroscopy-style coordinates: every 3-D point is dropped onto the
// (x, y) plane and mapped affinely from the base tree's projected bounding box
// onto [-1, 1]^2.

#include <Eigen/Core>

#include <array>
#include <memory>
#include <optional>

#include "endonav/devicesim/device_sim.hpp"
#include "endonav/env/task.hpp"
#include "endonav/rng.hpp"
#include "endonav/vessel/augment.hpp"

namespace endonav::env {

using vessel::Vec3;
using Vec2 = Eigen::Vector2d;

inline constexpr std::size_t kObsDim = 18;
inline constexpr std::size_t kActionDim = 4;
inline constexpr double kStepPenalty = 0.00015;
inline constexpr double kPathCoefficient = 0.001;  // per mm

using Action = std::array<double, kActionDim>;

struct Observation {
  std::array<Vec2, 3> tracking_now{Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};  // tip, 2 mm, 4 mm back
  std::array<Vec2, 3> tracking_prev{Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
  Vec2 target = Vec2::Zero();
  Action prev_action{};

  // [now (6), prev (6), target (2), prev_action (4)]
  Eigen::VectorXd flatten() const;

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct StepInfo {
  double pathlength = 0.0;        // mm
  double delta_pathlength = 0.0;  // mm
  double tip_force = 0.0;         // N
  double tip_speed = 0.0;         // mm/s
  bool reached = false;
  std::size_t step_index = 0;     // 1-based count of completed steps
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  StepInfo info;
};

struct EpisodeConfig {
  std::size_t max_steps = 200;
  double success_radius = 5.0;  // mm
  bool augment = false;
  double dt = sim::kControlPeriod;
  sim::SimParams sim;
};

double compute_reward(double delta_pathlength, bool reached);

Vec2 project_fluoro(const Vec3& p);

// Affine map of a projected bounding box onto [-1, 1]^2.
class Normalizer {
 public:
  // Throws NormalizationError on a box that is degenerate in x or y.
  explicit Normalizer(const vessel::Aabb& box);
  Vec2 normalize(const Vec2& p) const;  // clamped to [-1, 1]
  Vec2 denormalize(const Vec2& q) const;

 private:
  Vec2 lo_;
  Vec2 hi_;
};

Action clamp_action(const Action& a);
sim::DeviceCommand scale_action(const Action& a);

// Reset/step contract shared by the real environment and evaluation stubs.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual Observation reset(const TaskSpec& task, Rng& rng) = 0;
  virtual StepResult step(const Action& action) = 0;
  // Guidewire tip pathlength to the target (mm) at the current step.
  virtual double pathlength() const = 0;
  virtual double dt() const = 0;
};

class NavEnv final : public Environment {
 public:
  NavEnv(std::shared_ptr<const vessel::VesselTree> base, EpisodeConfig cfg);

  Observation reset(const TaskSpec& task, Rng& rng) override;
  StepResult step(const Action& action) override;
  double pathlength() const override { return pathlength_; }
  double dt() const override { return cfg_.dt; }

  bool active() const { return active_; }
  const EpisodeConfig& config() const { return cfg_; }
  const vessel::VesselTree& base_tree() const { return *base_; }
  const vessel::VesselTree& episode_tree() const { return *tree_; }
  const std::optional<vessel::AugmentParams>& augment_params() const { return augment_; }
  const sim::SimState& sim_state() const { return state_; }
  const TaskSpec& episode_task() const { return task_; }
  const Vec3& target_point() const { return target_; }
  vessel::ArcPosition target_arc() const { return target_arc_; }
  std::size_t step_index() const { return state_.step_index; }
  const Normalizer& normalizer() const { return norm_; }
  const sim::StepOutcome& last_outcome() const { return outcome_; }

 private:
  std::array<Vec2, 3> track(const sim::StepOutcome& outcome) const;
  double measure_pathlength(const Vec3& tip) const;

  std::shared_ptr<const vessel::VesselTree> base_;
  EpisodeConfig cfg_;
  Normalizer norm_;
  std::shared_ptr<const vessel::VesselTree> tree_;
  std::optional<vessel::AugmentParams> augment_;
  TaskSpec task_;
  Vec3 target_ = Vec3::Zero();
  vessel::ArcPosition target_arc_;
  sim::SimState state_;
  sim::StepOutcome outcome_;
  Observation obs_;
  double pathlength_ = 0.0;
  bool active_ = false;
};

}  // namespace endonav::env
