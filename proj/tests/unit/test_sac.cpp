#include <doctest.h>

#include <sstream>

#include "endonav/errors.hpp"
#include "endonav/sac/sac_agent.hpp"
#include "support/episodes.hpp"
#include "support/gradcheck.hpp"

using namespace endonav;
using namespace endonav::sac;
using endonav::approx::Tape;

namespace {

SacConfig tiny(bool multitask = false) {
  SacConfig c;
  c.multitask = multitask;
  c.lstm_hidden = 4;
  c.hidden = {6};
  c.batch = 3;
  // Longer than any test episode, so windows start at 0 and carry no
  // burn-in prefix (burn-in runs outside the tape by design).
  c.seq_len = 24;
  return c;
}

}  // namespace

TEST_CASE("configuration validation") {
  CHECK_NOTHROW(validate(SacConfig{}));
  auto bad = SacConfig{};
  bad.gamma = 1.5;
  CHECK_THROWS_AS(validate(bad), ArgumentError);
  bad = SacConfig{};
  bad.tau = 0.0;
  CHECK_THROWS_AS(validate(bad), ArgumentError);
  bad = SacConfig{};
  bad.batch = 0;
  CHECK_THROWS_AS(validate(bad), ArgumentError);
  bad = SacConfig{};
  bad.log_std_min = 3.0;
  CHECK_THROWS_AS(validate(bad), ArgumentError);
  CHECK(tiny(false).input_dim() == 18);
  CHECK(tiny(true).input_dim() == 23);
}

TEST_CASE("critic and actor gradients match finite differences") {
  for (const bool multitask : {false, true}) {
    CAPTURE(multitask);
    Rng rng(21);
    const auto buf = testing::random_buffer(rng);
    SacAgent agent(tiny(multitask), 7);
    const auto batch = buf.sample_sequences(3, 24, rng);
    const auto noise = draw_noise(batch.length, batch.batch, rng);
    const auto targets = agent.critic_targets(batch, noise);

    agent.critic_params().zero_grad();
    Tape tape;
    const auto pass = agent.critic_loss(tape, batch, targets);
    tape.backward(pass.loss);
    const auto critic_check = testing::check_gradients(
        agent.critic_params(),
        [&] {
          Tape t;
          return t.value(agent.critic_loss(t, batch, targets).loss)(0, 0);
        },
        agent.critic_params().flat_grads(), 1e-6, 1e-4);
    CHECK(critic_check.max_rel_error < 1e-5);
    CHECK(critic_check.max_abs_error < 1e-8);

    agent.actor_params().zero_grad();
    agent.critic_params().zero_grad();
    Tape atape;
    atape.backward(agent.actor_loss(atape, batch, noise, pass.hidden));
    CHECK(agent.critic_params().flat_grads().isZero());
    const auto actor_check = testing::check_gradients(
        agent.actor_params(),
        [&] {
          Tape t;
          return t.value(agent.actor_loss(t, batch, noise, pass.hidden))(0, 0);
        },
        agent.actor_params().flat_grads(), 1e-6, 1e-4);
    CHECK(actor_check.max_rel_error < 1e-5);
    CHECK(actor_check.max_abs_error < 1e-8);
  }
}

TEST_CASE("temperature loss gradient is the mean of -(log pi + target)") {
  Rng rng(22);
  const auto buf = testing::random_buffer(rng);
  SacAgent agent(tiny(), 8);
  const auto batch = buf.sample_sequences(3, 24, rng);
  const auto noise = draw_noise(batch.length, batch.batch, rng);
  const auto targets = agent.critic_targets(batch, noise);
  Tape ct;
  const auto pass = agent.critic_loss(ct, batch, targets);
  Tape at;
  std::vector<approx::Matrix> logp;
  agent.actor_loss(at, batch, noise, pass.hidden, &logp);
  double sum = 0.0, n = 0.0;
  for (std::size_t t = 0; t < logp.size(); ++t)
    for (Eigen::Index j = 0; j < 3; ++j) {
      sum += batch.mask[t](0, j) * (logp[t](0, j) + agent.config().entropy_target);
      n += batch.mask[t](0, j);
    }
  agent.alpha_params().zero_grad();
  Tape tt;
  tt.backward(agent.alpha_loss(tt, batch, logp));
  CHECK(agent.alpha_params().flat_grads()[0] == doctest::Approx(-sum / n).epsilon(1e-12));
  CHECK(agent.alpha() == doctest::Approx(agent.config().init_alpha));
}

TEST_CASE("targets reduce to rewards without bootstrapping") {
  Rng rng(23);
  const auto buf = testing::random_buffer(rng);
  auto cfg = tiny();
  cfg.gamma = 1e-12;
  SacAgent flat(cfg, 9);
  const auto batch = buf.sample_sequences(3, 24, rng);
  const auto noise = draw_noise(batch.length, batch.batch, rng);
  const auto ys = flat.critic_targets(batch, noise);
  for (std::size_t t = 0; t < batch.length; ++t) CHECK((ys[t] - batch.reward[t]).cwiseAbs().maxCoeff() < 1e-9);

  // Terminal transitions never bootstrap, whatever gamma is.
  SacAgent agent(tiny(), 9);
  const auto yd = agent.critic_targets(batch, noise);
  for (std::size_t t = 0; t < batch.length; ++t)
    for (Eigen::Index j = 0; j < 3; ++j)
      if (batch.done[t](0, j) == 1.0) CHECK(yd[t](0, j) == batch.reward[t](0, j));
}

TEST_CASE("updates fit a fixed batch and move targets slowly") {
  Rng rng(24);
  const auto buf = testing::random_buffer(rng);
  auto cfg = tiny();
  cfg.gamma = 1e-12;
  cfg.lr = 3e-3;
  SacAgent agent(cfg, 10);
  const auto batch = buf.sample_sequences(3, 24, rng);
  const auto before_target = agent.target_params();
  const double first = agent.update(batch, rng).at("critic");
  double last = first;
  for (int i = 0; i < 200; ++i) last = agent.update(batch, rng).at("critic");
  CHECK(last < 0.2 * first);
  // Polyak averaging: the target lags the online critic.
  const double moved = (agent.target_params().flat_values() - before_target.flat_values()).norm();
  const double online = (agent.critic_params().flat_values() - before_target.flat_values()).norm();
  CHECK(moved > 0.0);
  CHECK(moved < online);
}

TEST_CASE("acting is bounded, deterministic and resumable") {
  Rng rng(25);
  const auto ep = testing::random_episode(rng, 20, env::TaskId::A2R, false);
  SacAgent a(tiny(true), 11);
  SacAgent b(tiny(true), 11);
  a.begin_episode(env::TaskId::A2R);
  b.begin_episode(env::TaskId::A2R);
  Rng ra(1), rb(1);
  for (const auto& o : ep.observations) {
    const auto x = a.act(o, false, ra);
    const auto y = b.act(o, false, rb);
    CHECK(x == y);
    for (double v : x) CHECK(std::abs(v) <= 1.0);
    const auto m = a.act(o, true, ra);
    CHECK(m == b.act(o, true, rb));
    for (double v : m) CHECK(std::abs(v) <= 1.0);
  }

  std::stringstream buf;
  a.save(buf);
  SacAgent c(tiny(true), 99);
  c.load(buf);
  CHECK(c.actor_params() == a.actor_params());
  CHECK(c.critic_params() == a.critic_params());
  CHECK(c.target_params() == a.target_params());

  std::stringstream buf2;
  a.save(buf2);
  SacAgent other(tiny(false), 1);
  CHECK_THROWS_AS(other.load(buf2), FormatError);
  std::stringstream junk("xyz");
  CHECK_THROWS_AS(c.load(junk), FormatError);
}

TEST_CASE("malformed batches are rejected") {
  SacAgent agent(tiny(), 12);
  replay::SequenceBatch empty;
  Rng rng(1);
  CHECK_THROWS_AS(agent.update(empty, rng), ShapeError);
}
