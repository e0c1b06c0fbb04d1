#include "endonav/env/nav_env.hpp"

#include <algorithm>
#include <cmath>

#include "endonav/errors.hpp"

namespace endonav::env {

Eigen::VectorXd Observation::flatten() const {
  Eigen::VectorXd v(kObsDim);
  std::size_t k = 0;
  for (const auto& p : tracking_now) {
    v[k++] = p.x();
    v[k++] = p.y();
  }
  for (const auto& p : tracking_prev) {
    v[k++] = p.x();
    v[k++] = p.y();
  }
  v[k++] = target.x();
  v[k++] = target.y();
  for (double a : prev_action) v[k++] = a;
  return v;
}

double compute_reward(double delta_pathlength, bool reached) {
  return -kStepPenalty - kPathCoefficient * delta_pathlength + (reached ? 1.0 : 0.0);
}

Vec2 project_fluoro(const Vec3& p) { return {p.x(), p.y()}; }

Normalizer::Normalizer(const vessel::Aabb& box)
    : lo_(box.min.x(), box.min.y()), hi_(box.max.x(), box.max.y()) {
  if (!(hi_.x() - lo_.x() > 1e-9) || !(hi_.y() - lo_.y() > 1e-9))
    throw NormalizationError("projected bounding box is degenerate");
}

Vec2 Normalizer::normalize(const Vec2& p) const {
  Vec2 q = 2.0 * (p - lo_).cwiseQuotient(hi_ - lo_) - Vec2::Ones();
  return q.cwiseMax(-1.0).cwiseMin(1.0);
}

Vec2 Normalizer::denormalize(const Vec2& q) const {
  return lo_ + 0.5 * (q + Vec2::Ones()).cwiseProduct(hi_ - lo_);
}

Action clamp_action(const Action& a) {
  Action out;
  for (std::size_t i = 0; i < kActionDim; ++i)
    out[i] = std::isfinite(a[i]) ? std::clamp(a[i], -1.0, 1.0) : 0.0;
  return out;
}

sim::DeviceCommand scale_action(const Action& a) {
  const Action c = clamp_action(a);
  return {c[0] * sim::kMaxTranslationSpeed, c[1] * sim::kMaxRotationSpeed,
          c[2] * sim::kMaxTranslationSpeed, c[3] * sim::kMaxRotationSpeed};
}

NavEnv::NavEnv(std::shared_ptr<const vessel::VesselTree> base, EpisodeConfig cfg)
    : base_(std::move(base)), cfg_(cfg), norm_(base_->bounding_box()), tree_(base_) {
  if (cfg_.max_steps == 0) throw ArgumentError("max_steps must be positive");
  if (!(cfg_.success_radius > 0.0)) throw ArgumentError("success_radius must be positive");
  if (!(cfg_.dt > 0.0)) throw ArgumentError("dt must be positive");
  sim::validate(cfg_.sim.guidewire);
  sim::validate(cfg_.sim.catheter);
}

std::array<Vec2, 3> NavEnv::track(const sim::StepOutcome& outcome) const {
  std::array<Vec2, 3> out;
  for (std::size_t k = 0; k < 3; ++k)
    out[k] = norm_.normalize(project_fluoro(outcome.tracking_points[k]));
  return out;
}

double NavEnv::measure_pathlength(const Vec3& tip) const {
  return tree_->path_length(tree_->nearest_lumen_point(tip).position, target_arc_);
}

Observation NavEnv::reset(const TaskSpec& task, Rng& rng) {
  active_ = false;
  validate_task(task, *base_);
  if (cfg_.augment) {
    augment_ = vessel::draw_augment_params(rng);
    tree_ = std::make_shared<const vessel::VesselTree>(
        vessel::apply_augmentation(*base_, *augment_));
    task_ = map_task(task, *base_, *tree_);
  } else {
    augment_.reset();
    tree_ = base_;
    task_ = task;
  }

  const auto target = tree_->sample_region(task_.target, rng);
  target_ = target.point;
  target_arc_ = target.at;

  const double margin = std::max(cfg_.sim.guidewire.radius(), cfg_.sim.catheter.radius());
  const auto start = tree_->sample_region(task_.start, rng, margin);
  const Vec3 heading = tree_->tangent_at(start.at);
  sim::Placement placement;
  try {
    placement = sim::reset_devices(*tree_, start.point, heading, cfg_.sim);
  } catch (const PlacementError& e) {
    throw ResetError(std::string("device placement failed: ") + e.what());
  }
  state_ = std::move(placement.state);
  outcome_ = std::move(placement.outcome);

  obs_.tracking_now = track(outcome_);
  obs_.tracking_prev = obs_.tracking_now;
  obs_.target = norm_.normalize(project_fluoro(target_));
  obs_.prev_action = Action{};
  pathlength_ = measure_pathlength(outcome_.tracking_points[0]);
  active_ = true;
  return obs_;
}

StepResult NavEnv::step(const Action& action) {
  if (!active_) throw LifecycleError("step called on an inactive episode; call reset first");
  const Action a = clamp_action(action);
  outcome_ = sim::sim_step(state_, *tree_, scale_action(a), cfg_.dt, cfg_.sim);

  StepResult r;
  const Vec3& tip = outcome_.tracking_points[0];
  const double pl = measure_pathlength(tip);
  r.info.pathlength = pl;
  r.info.delta_pathlength = pl - pathlength_;
  r.info.reached = (tip - target_).norm() <= cfg_.success_radius;
  r.info.tip_force = sim::tip_force_norm(outcome_.contacts);
  r.info.tip_speed = outcome_.tip_displacement / cfg_.dt;
  r.info.step_index = state_.step_index;
  r.reward = compute_reward(r.info.delta_pathlength, r.info.reached);
  r.terminated = r.info.reached;
  r.truncated = !r.terminated && state_.step_index >= cfg_.max_steps;
  pathlength_ = pl;

  obs_.tracking_prev = obs_.tracking_now;
  obs_.tracking_now = track(outcome_);
  obs_.prev_action = a;
  r.obs = obs_;
  active_ = !(r.terminated || r.truncated);
  return r;
}

}  // namespace endonav::env
