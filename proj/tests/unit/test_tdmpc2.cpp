#include <doctest.h>

#include <sstream>

#include "endonav/errors.hpp"
#include "endonav/tdmpc2/tdmpc2_agent.hpp"
#include "support/episodes.hpp"
#include "support/gradcheck.hpp"

using namespace endonav;
using namespace endonav::tdmpc2;

namespace {

Tdmpc2Config tiny() {
  Tdmpc2Config c;
  c.model.lstm_hidden = 4;
  c.model.latent = 5;
  c.model.hidden = {6};
  c.model.task_dim = 3;
  c.model.ensemble = 3;
  c.plan.horizon = 3;
  c.plan.iterations = 2;
  c.plan.samples = 16;
  c.plan.elites = 4;
  c.plan.policy_samples = 4;
  c.batch = 3;
  c.seq_len = 24;  // covers whole test episodes, no burn-in prefix
  return c;
}

std::vector<Matrix> noise(std::size_t L, std::size_t B, Rng& rng) {
  std::vector<Matrix> out;
  for (std::size_t t = 0; t < L; ++t) {
    Matrix m(4, static_cast<Eigen::Index>(B));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    out.push_back(m);
  }
  return out;
}

// Latent = 4-vector position; actions are displacements; reward is the
// negative squared distance of the action from a fixed optimum.
class QuadraticModel final : public LatentModel {
 public:
  explicit QuadraticModel(Eigen::Vector4d best) : best_(std::move(best)) {}
  Matrix next(const Matrix& z, const Matrix& a, TaskId) const override { return z + a; }
  Matrix reward(const Matrix&, const Matrix& a, TaskId) const override {
    return -(a.colwise() - best_).colwise().squaredNorm();
  }
  Matrix value(const Matrix& z, const Matrix&, TaskId, Rng&) const override {
    return Matrix::Zero(1, z.cols());
  }
  Matrix policy(const Matrix& z, TaskId, Rng& rng) const override {
    Matrix a(4, z.cols());
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-1, 1);
    return a;
  }

 private:
  Eigen::Vector4d best_;
};

class NanModel final : public LatentModel {
 public:
  Matrix next(const Matrix& z, const Matrix&, TaskId) const override { return z; }
  Matrix reward(const Matrix& z, const Matrix&, TaskId) const override {
    return Matrix::Constant(1, z.cols(), std::nan(""));
  }
  Matrix value(const Matrix& z, const Matrix&, TaskId, Rng&) const override {
    return Matrix::Zero(1, z.cols());
  }
  Matrix policy(const Matrix& z, TaskId, Rng&) const override { return Matrix::Zero(4, z.cols()); }
};

}  // namespace

TEST_CASE("configuration validation") {
  CHECK_NOTHROW(validate(Tdmpc2Config{}));
  auto c = Tdmpc2Config{};
  c.plan.elites = c.plan.samples + c.plan.policy_samples + 1;
  CHECK_THROWS_AS(validate(c), ArgumentError);
  c = Tdmpc2Config{};
  c.plan.horizon = 0;
  CHECK_THROWS_AS(validate(c), ArgumentError);
  c = Tdmpc2Config{};
  c.model.ensemble = 1;
  CHECK_THROWS_AS(validate(c), ArgumentError);
  c = Tdmpc2Config{};
  c.plan.temperature = 0.0;
  CHECK_THROWS_AS(validate(c), ArgumentError);
  c = Tdmpc2Config{};
  c.seq_len = 2;
  CHECK_THROWS_AS(validate(c), ArgumentError);
  CHECK(Tdmpc2Config{}.window() == Tdmpc2Config{}.plan.horizon + 1);
}

TEST_CASE("joint loss gradients match finite differences") {
  Rng rng(31);
  const auto buf = testing::random_buffer(rng);
  WorldModel model(tiny().model, 5);
  const auto batch = buf.sample_sequences(3, 24, rng);
  const auto pn = noise(batch.length, batch.batch, rng);
  const LossWeights w;
  const auto targets = model.compute_targets(batch, pn, w);
  REQUIRE(targets.latent.size() == batch.length);

  const auto loss = [&] {
    Tape t;
    return t.value(model.joint_loss(t, batch, targets, w).total)(0, 0);
  };
  model.model_params().zero_grad();
  model.q_params().zero_grad();
  Tape tape;
  const auto jl = model.joint_loss(tape, batch, targets, w);
  tape.backward(jl.total);
  CHECK(tape.value(jl.total)(0, 0) ==
        doctest::Approx(w.consistency * jl.consistency + w.reward * jl.reward + w.value * jl.value));
  const auto gm = testing::check_gradients(model.model_params(), loss,
                                           model.model_params().flat_grads(), 1e-6, 1e-4);
  CHECK(gm.max_rel_error < 1e-5);
  CHECK(gm.max_abs_error < 1e-8);
  const auto gq =
      testing::check_gradients(model.q_params(), loss, model.q_params().flat_grads(), 1e-6, 1e-4);
  CHECK(gq.max_rel_error < 1e-5);
  CHECK(gq.max_abs_error < 1e-8);

  SUBCASE("policy loss") {
    const auto lp = [&] {
      Tape t;
      return t.value(model.policy_loss(t, jl.rollout, batch, pn, w))(0, 0);
    };
    model.policy_params().zero_grad();
    model.q_params().zero_grad();
    Tape pt;
    pt.backward(model.policy_loss(pt, jl.rollout, batch, pn, w));
    CHECK(model.q_params().flat_grads().isZero());
    const auto gp = testing::check_gradients(model.policy_params(), lp,
                                             model.policy_params().flat_grads(), 1e-6, 1e-4);
    CHECK(gp.max_rel_error < 1e-5);
    CHECK(gp.max_abs_error < 1e-8);
  }
}

TEST_CASE("terminal targets do not bootstrap") {
  Rng rng(32);
  const auto buf = testing::random_buffer(rng);
  WorldModel model(tiny().model, 6);
  const auto batch = buf.sample_sequences(3, 24, rng);
  const auto targets = model.compute_targets(batch, noise(batch.length, batch.batch, rng), {});
  int terminal = 0;
  for (std::size_t t = 0; t < batch.length; ++t)
    for (Eigen::Index j = 0; j < 3; ++j)
      if (batch.done[t](0, j) == 1.0) {
        CHECK(targets.value[t](0, j) == batch.reward[t](0, j));
        ++terminal;
      }
  CHECK(terminal > 0);
  for (const auto& z : targets.latent) CHECK(z.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("refit matches a direct weighted mean and deviation") {
  Rng rng(33);
  Matrix actions(3, 5);
  for (Eigen::Index i = 0; i < actions.size(); ++i) actions.data()[i] = rng.uniform(-1, 1);
  Eigen::VectorXd g(5);
  g << 0.3, -0.1, 0.25, 0.0, 0.31;
  const double temp = 0.05;
  const auto [mean, sd] = refit(actions, g, temp, 0.0, 10.0);
  for (Eigen::Index r = 0; r < 3; ++r) {
    double wsum = 0, m = 0;
    for (Eigen::Index k = 0; k < 5; ++k) {
      const double wk = std::exp(g[k] / temp);
      wsum += wk;
      m += wk * actions(r, k);
    }
    m /= wsum;
    double v = 0;
    for (Eigen::Index k = 0; k < 5; ++k) v += std::exp(g[k] / temp) / wsum * std::pow(actions(r, k) - m, 2);
    CHECK(mean[r] == doctest::Approx(m).epsilon(1e-12));
    CHECK(sd[r] == doctest::Approx(std::sqrt(v)).epsilon(1e-12));
  }
  const auto clamped = refit(actions, g, temp, 0.5, 0.6).second;
  CHECK(clamped.minCoeff() >= 0.5);
  CHECK(clamped.maxCoeff() <= 0.6);
}

TEST_CASE("sequence evaluation discounts rewards and the terminal value") {
  const Eigen::Vector4d best(0.2, -0.4, 0.6, 0.0);
  const QuadraticModel model(best);
  Rng rng(34);
  Matrix seq(8, 2);
  seq.col(0) << best, best;
  seq.col(1) << Eigen::Vector4d::Zero(), best;
  const auto g = evaluate_sequences(model, Eigen::Vector4d::Zero(), seq, 2, 0.5, TaskId::A1, rng);
  CHECK(g[0] == doctest::Approx(0.0));
  CHECK(g[1] == doctest::Approx(-best.squaredNorm()));
  seq.col(1) << best, Eigen::Vector4d::Zero();
  CHECK(evaluate_sequences(model, Eigen::Vector4d::Zero(), seq, 2, 0.5, TaskId::A1, rng)[1] ==
        doctest::Approx(-0.5 * best.squaredNorm()));
}

TEST_CASE("planner finds the optimum of a quadratic objective") {
  const Eigen::Vector4d best(0.5, -0.3, 0.8, -0.7);
  const QuadraticModel model(best);
  PlanConfig cfg;
  Rng rng(35);
  for (int trial = 0; trial < 10; ++trial) {
    const auto r = plan(model, Eigen::Vector4d::Zero(), TaskId::A1, cfg, nullptr, rng, true);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(r.action[i] - best[static_cast<Eigen::Index>(i)]) < 0.05);
    CHECK(r.action == r.mean[0]);
    CHECK(r.predicted_return <= 0.0);
    // Elites keep at least min_std spread per component; within two of them
    // the return is above -H * 4 * (2 min_std)^2.
    CHECK(r.predicted_return > -static_cast<double>(cfg.horizon) * 4 * std::pow(2 * cfg.min_std, 2));
  }

  SUBCASE("warm start shifts the previous mean by one step") {
    const auto first = plan(model, Eigen::Vector4d::Zero(), TaskId::A1, cfg, nullptr, rng, true);
    for (const auto& m : first.init_mean) CHECK(m == env::Action{});
    const auto second = plan(model, Eigen::Vector4d::Zero(), TaskId::A1, cfg, &first, rng, false);
    REQUIRE(second.init_mean.size() == cfg.horizon);
    for (std::size_t t = 0; t + 1 < cfg.horizon; ++t) CHECK(second.init_mean[t] == first.mean[t + 1]);
    CHECK(second.init_mean.back() == env::Action{});
    for (double v : second.action) CHECK(std::abs(v) <= 1.0);
  }
}

TEST_CASE("planner rejects non-finite scores") {
  Rng rng(36);
  CHECK_THROWS_AS(plan(NanModel{}, Eigen::Vector4d::Zero(), TaskId::A1, PlanConfig{}, nullptr, rng, true),
                  NumericError);
}

TEST_CASE("agent acting, updating and checkpointing") {
  Rng rng(37);
  const auto buf = testing::random_buffer(rng);
  Tdmpc2Agent agent(tiny(), 3);
  agent.begin_episode(TaskId::A3L);
  const auto ep = testing::random_episode(rng, 4, TaskId::A3L, false);
  for (const auto& o : ep.observations) {
    const auto a = agent.act(o, false, rng);
    for (double v : a) CHECK(std::abs(v) <= 1.0);
    REQUIRE(agent.last_plan().has_value());
    CHECK(agent.last_latent().cwiseAbs().maxCoeff() <= 1.0);
  }
  const auto batch = buf.sample_sequences(3, 24, rng);
  const auto before = agent.model().q_target_params();
  const auto losses = agent.update(batch, rng);
  for (const char* k : {"consistency", "reward", "value", "policy"}) CHECK(losses.count(k) == 1);
  CHECK_FALSE(agent.model().q_target_params() == before);

  std::stringstream out;
  agent.save(out);
  Tdmpc2Agent copy(tiny(), 99);
  copy.load(out);
  CHECK(copy.model().model_params() == agent.model().model_params());
  CHECK(copy.model().policy_params() == agent.model().policy_params());
  auto other_cfg = tiny();
  other_cfg.model.latent = 7;
  Tdmpc2Agent other(other_cfg, 1);
  std::stringstream out2;
  agent.save(out2);
  CHECK_THROWS_AS(other.load(out2), FormatError);
}

TEST_CASE("large temperature refit is the unweighted elite mean") {
  Rng rng(38);
  Matrix actions(4, 9);
  for (Eigen::Index i = 0; i < actions.size(); ++i) actions.data()[i] = rng.uniform(-1, 1);
  Eigen::VectorXd g(9);
  for (Eigen::Index i = 0; i < 9; ++i) g[i] = rng.uniform(-2, 2);
  const auto [mean, sd] = refit(actions, g, 1e9, 0.0, 10.0);
  CHECK((mean - actions.rowwise().mean()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("planning is deterministic given the seed") {
  const QuadraticModel model(Eigen::Vector4d(0.1, 0.2, 0.3, 0.4));
  Rng a(39), b(39);
  const auto x = plan(model, Eigen::Vector4d::Zero(), TaskId::A1, PlanConfig{}, nullptr, a, false);
  const auto y = plan(model, Eigen::Vector4d::Zero(), TaskId::A1, PlanConfig{}, nullptr, b, false);
  CHECK(x.action == y.action);
  CHECK(x.mean == y.mean);
  CHECK(x.std == y.std);
}
