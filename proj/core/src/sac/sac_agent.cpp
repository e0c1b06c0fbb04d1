#include "endonav/sac/sac_agent.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "endonav/errors.hpp"

namespace endonav::sac {
namespace {

using approx::Lstm;
using approx::ParamStore;
using approx::RecurrentState;
using approx::Tape;
using approx::Var;

constexpr auto kA = static_cast<Eigen::Index>(env::kActionDim);
constexpr char kMagic[8] = {'E', 'N', 'V', 'S', 'A', 'C', '0', '1'};
Matrix blend(const Matrix& next, const Matrix& prev, const Matrix& mask) {
  Matrix out = prev;
  for (Eigen::Index j = 0; j < mask.cols(); ++j)
    if (mask(0, j) != 0.0) out.col(j) = next.col(j);
  return out;
}

double mask_total(const SequenceBatch& batch) {
  double total = 0.0;
  for (const auto& m : batch.mask) total += m.sum();
  if (!(total > 0.0)) throw ArgumentError("sequence batch has no valid transitions");
  return total;
}

void check_finite(double v, const char* what, std::uint64_t step) {
  if (!std::isfinite(v))
    throw NumericError(std::string("SAC update ") + std::to_string(step) + ": non-finite " + what);
}

}  // namespace

Eigen::Index SacConfig::input_dim() const {
  return static_cast<Eigen::Index>(env::kObsDim + (multitask ? env::kTaskCount : 0));
}

void validate(const SacConfig& cfg) {
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw ArgumentError("sac: gamma must lie in (0, 1)");
  if (!(cfg.tau > 0.0 && cfg.tau <= 1.0)) throw ArgumentError("sac: tau must lie in (0, 1]");
  if (!(cfg.lr > 0.0)) throw ArgumentError("sac: lr must be positive");
  if (!(cfg.init_alpha > 0.0)) throw ArgumentError("sac: init_alpha must be positive");
  if (cfg.lstm_hidden <= 0 || cfg.batch == 0 || cfg.seq_len == 0)
    throw ArgumentError("sac: sizes must be positive");
  for (auto w : cfg.hidden)
    if (w <= 0) throw ArgumentError("sac: hidden widths must be positive");
  if (!(cfg.log_std_min < cfg.log_std_max)) throw ArgumentError("sac: log_std bounds reversed");
}

SacNoise draw_noise(std::size_t length, std::size_t batch, Rng& rng) {
  SacNoise n;
  const auto B = static_cast<Eigen::Index>(batch);
  auto draw = [&] {
    Matrix m(kA, B);
    for (Eigen::Index j = 0; j < B; ++j)
      for (Eigen::Index i = 0; i < kA; ++i) m(i, j) = rng.normal();
    return m;
  };
  for (std::size_t t = 0; t < length; ++t) n.next.push_back(draw());
  for (std::size_t t = 0; t < length; ++t) n.current.push_back(draw());
  return n;
}

Matrix squashed_log_prob(const Matrix& eps, const Matrix& log_std, const Matrix& u) {
  return approx::squashed_log_prob(eps, log_std, u);
}

SacAgent::SacAgent(const SacConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg_);
  Rng rng(seed);
  const Eigen::Index in = cfg_.input_dim();
  const Eigen::Index H = cfg_.lstm_hidden;
  actor_lstm_ = Lstm::create(actor_store_, "actor.lstm", in, H, rng);
  actor_head_ = approx::Mlp::create(actor_store_, "actor.head", H, cfg_.hidden, 2 * kA,
                                    approx::Activation::Relu, rng, 0.1);
  for (std::size_t k = 0; k < 2; ++k) {
    const std::string name = "critic" + std::to_string(k + 1);
    critic_lstm_[k] = Lstm::create(critic_store_, name + ".lstm", in, H, rng);
    critic_head_[k] = approx::Mlp::create(critic_store_, name + ".head", H + kA, cfg_.hidden, 1,
                                          approx::Activation::Relu, rng);
  }
  target_store_ = critic_store_;
  log_alpha_ = alpha_store_.add("log_alpha", Matrix::Constant(1, 1, std::log(cfg_.init_alpha)));
  act_state_ = RecurrentState::zeros(H);
}

double SacAgent::alpha() const { return std::exp(alpha_store_.value(log_alpha_)(0, 0)); }

Matrix SacAgent::inputs(const Matrix& obs, const Matrix& onehot) const {
  if (!cfg_.multitask) return obs;
  Matrix x(cfg_.input_dim(), obs.cols());
  x << obs, onehot;
  return x;
}

std::vector<Matrix> SacAgent::batch_inputs(const std::vector<Matrix>& obs,
                                           const SequenceBatch& batch) const {
  std::vector<Matrix> xs;
  xs.reserve(obs.size());
  for (const auto& o : obs) xs.push_back(inputs(o, batch.task_onehot));
  return xs;
}

RecurrentState SacAgent::burn_in(const Lstm& lstm, const ParamStore& store,
                                 const SequenceBatch& batch) const {
  const auto B = static_cast<Eigen::Index>(batch.batch);
  RecurrentState s = RecurrentState::zeros(lstm.hidden, B);
  for (std::size_t t = 0; t < batch.burn_obs.size(); ++t) {
    if (batch.burn_mask[t].sum() == 0.0) continue;
    const RecurrentState n = lstm.infer_step(store, inputs(batch.burn_obs[t], batch.task_onehot), s);
    s.h = blend(n.h, s.h, batch.burn_mask[t]);
    s.c = blend(n.c, s.c, batch.burn_mask[t]);
  }
  return s;
}

std::vector<Matrix> SacAgent::unroll(const Lstm& lstm, const ParamStore& store,
                                     const std::vector<Matrix>& xs, RecurrentState s) const {
  std::vector<Matrix> hs;
  hs.reserve(xs.size());
  for (const auto& x : xs) {
    s = lstm.infer_step(store, x, s);
    hs.push_back(s.h);
  }
  return hs;
}

std::pair<Matrix, Matrix> SacAgent::head_split(const Matrix& out) const {
  return {out.topRows(kA), approx::bounded_log_std(out.bottomRows(kA), cfg_.log_std_min, cfg_.log_std_max)};
}

void SacAgent::begin_episode(env::TaskId task) {
  act_task_ = task;
  act_state_ = RecurrentState::zeros(cfg_.lstm_hidden);
}

env::Action SacAgent::act(const env::Observation& obs, bool deterministic, Rng& rng) {
  return act_from(obs, act_task_, act_state_, deterministic, rng);
}

env::Action SacAgent::act_from(const env::Observation& obs, env::TaskId task,
                               RecurrentState& state, bool deterministic, Rng& rng) const {
  const Matrix x = inputs(obs.flatten(), replay::task_onehot({task}));
  state = actor_lstm_.infer_step(actor_store_, x, state);
  const auto [mean, log_std] = head_split(actor_head_.infer(actor_store_, state.h));
  env::Action a;
  for (Eigen::Index i = 0; i < kA; ++i) {
    double u = mean(i, 0);
    if (!deterministic) u += std::exp(log_std(i, 0)) * rng.normal();
    a[static_cast<std::size_t>(i)] = std::tanh(u);
  }
  return a;
}

Eigen::VectorXd SacAgent::policy_mean(const env::Observation& obs, env::TaskId task,
                                      const RecurrentState& state) const {
  const Matrix x = inputs(obs.flatten(), replay::task_onehot({task}));
  const RecurrentState s = actor_lstm_.infer_step(actor_store_, x, state);
  return head_split(actor_head_.infer(actor_store_, s.h)).first.col(0).array().tanh();
}

std::vector<Matrix> SacAgent::critic_targets(const SequenceBatch& batch, const SacNoise& noise) const {
  const std::size_t L = batch.length;
  const std::vector<Matrix> xs = batch_inputs(batch.obs, batch);
  const std::vector<Matrix> ha = unroll(actor_lstm_, actor_store_, xs, burn_in(actor_lstm_, actor_store_, batch));
  std::array<std::vector<Matrix>, 2> ht;
  for (std::size_t k = 0; k < 2; ++k)
    ht[k] = unroll(critic_lstm_[k], target_store_, xs, burn_in(critic_lstm_[k], target_store_, batch));

  const double a = alpha();
  std::vector<Matrix> ys;
  ys.reserve(L);
  for (std::size_t t = 0; t < L; ++t) {
    const auto [mean, log_std] = head_split(actor_head_.infer(actor_store_, ha[t + 1]));
    const Matrix u = mean + (log_std.array().exp() * noise.next[t].array()).matrix();
    const Matrix act = u.array().tanh();
    const Matrix logp = squashed_log_prob(noise.next[t], log_std, u);
    std::array<Matrix, 2> q;
    for (std::size_t k = 0; k < 2; ++k) {
      Matrix in(cfg_.lstm_hidden + kA, u.cols());
      in << ht[k][t + 1], act;
      q[k] = critic_head_[k].infer(target_store_, in);
    }
    const Matrix soft = q[0].cwiseMin(q[1]) - a * logp;
    ys.push_back(batch.reward[t] +
                 (cfg_.gamma * (1.0 - batch.done[t].array()) * soft.array()).matrix());
  }
  return ys;
}

SacAgent::CriticPass SacAgent::critic_loss(Tape& tape, const SequenceBatch& batch,
                                           const std::vector<Matrix>& targets) {
  const std::size_t L = batch.length;
  const double inv_total = 1.0 / mask_total(batch);
  const std::vector<Matrix> xs = batch_inputs(batch.obs, batch);
  CriticPass pass;
  std::vector<Var> terms;
  for (std::size_t k = 0; k < 2; ++k) {
    const auto lstm = critic_lstm_[k].bind(tape, critic_store_);
    const auto head = critic_head_[k].bind(tape, critic_store_);
    const RecurrentState s0 = burn_in(critic_lstm_[k], critic_store_, batch);
    Lstm::TapeState s{tape.constant(s0.h), tape.constant(s0.c)};
    for (std::size_t t = 0; t < L; ++t) {
      s = critic_lstm_[k].step(tape, lstm, tape.constant(xs[t]), s);
      pass.hidden[k].push_back(tape.value(s.h));
      const Var in = tape.concat_rows({s.h, tape.constant(batch.action[t])});
      const Var q = critic_head_[k].forward(tape, head, in);
      const Var err = tape.square(tape.sub(q, tape.constant(targets[t])));
      terms.push_back(tape.sum(tape.mul(err, tape.constant(batch.mask[t]))));
    }
  }
  Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = tape.add(total, terms[i]);
  pass.loss = tape.scale(total, inv_total);
  return pass;
}

Var SacAgent::actor_loss(Tape& tape, const SequenceBatch& batch, const SacNoise& noise,
                         const std::array<std::vector<Matrix>, 2>& critic_hidden,
                         std::vector<Matrix>* log_probs) {
  const std::size_t L = batch.length;
  const double inv_total = 1.0 / mask_total(batch);
  const double a = alpha();
  const std::vector<Matrix> xs = batch_inputs(batch.obs, batch);

  const auto lstm = actor_lstm_.bind(tape, actor_store_);
  const auto head = actor_head_.bind(tape, actor_store_);
  std::array<approx::Mlp::Bound, 2> critic;
  for (std::size_t k = 0; k < 2; ++k) critic[k] = critic_head_[k].bind(tape, critic_store_, true);
  const RecurrentState s0 = burn_in(actor_lstm_, actor_store_, batch);
  Lstm::TapeState s{tape.constant(s0.h), tape.constant(s0.c)};

  if (log_probs) log_probs->clear();
  std::vector<Var> terms;
  for (std::size_t t = 0; t < L; ++t) {
    s = actor_lstm_.step(tape, lstm, tape.constant(xs[t]), s);
    const Var out = actor_head_.forward(tape, head, s.h);
    const Var mean = tape.slice_rows(out, 0, kA);
    const Var log_std =
        approx::bounded_log_std(tape, tape.slice_rows(out, kA, kA), cfg_.log_std_min, cfg_.log_std_max);
    const Var u = tape.add(mean, tape.mul(tape.exp(log_std), tape.constant(noise.current[t])));
    const Var act = tape.tanh(u);
    const Var logp = approx::squashed_log_prob(tape, noise.current[t], log_std, u);
    if (log_probs) log_probs->push_back(tape.value(logp));

    std::array<Var, 2> q;
    for (std::size_t k = 0; k < 2; ++k) {
      const Var in = tape.concat_rows({tape.constant(critic_hidden[k][t]), act});
      q[k] = critic_head_[k].forward(tape, critic[k], in);
    }
    const Var term = tape.sub(tape.scale(logp, a), tape.min(q[0], q[1]));
    terms.push_back(tape.sum(tape.mul(term, tape.constant(batch.mask[t]))));
  }
  Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = tape.add(total, terms[i]);
  return tape.scale(total, inv_total);
}

Var SacAgent::alpha_loss(Tape& tape, const SequenceBatch& batch, const std::vector<Matrix>& log_probs) {
  const double inv_total = 1.0 / mask_total(batch);
  double c = 0.0;
  for (std::size_t t = 0; t < log_probs.size(); ++t)
    c += ((log_probs[t].array() + cfg_.entropy_target) * batch.mask[t].array()).sum();
  c *= inv_total;
  return tape.scale(tape.param(alpha_store_, log_alpha_), -c);
}

replay::Losses SacAgent::update(const SequenceBatch& batch, Rng& rng) {
  if (batch.obs.empty() || batch.obs[0].rows() != static_cast<Eigen::Index>(env::kObsDim))
    throw ShapeError("sac: batch observations have the wrong shape");
  const std::uint64_t step = critic_store_.steps();
  const SacNoise noise = draw_noise(batch.length, batch.batch, rng);
  const std::vector<Matrix> targets = critic_targets(batch, noise);

  Tape critic_tape;
  critic_store_.zero_grad();
  const CriticPass cp = critic_loss(critic_tape, batch, targets);
  const double lc = critic_tape.value(cp.loss)(0, 0);
  check_finite(lc, "critic loss", step);
  critic_tape.backward(cp.loss);

  Tape actor_tape;
  actor_store_.zero_grad();
  std::vector<Matrix> log_probs;
  const Var al = actor_loss(actor_tape, batch, noise, cp.hidden, &log_probs);
  const double la = actor_tape.value(al)(0, 0);
  check_finite(la, "actor loss", step);
  actor_tape.backward(al);

  Tape alpha_tape;
  alpha_store_.zero_grad();
  const Var tl = alpha_loss(alpha_tape, batch, log_probs);
  const double lt = alpha_tape.value(tl)(0, 0);
  check_finite(lt, "temperature loss", step);
  alpha_tape.backward(tl);

  const approx::AdamConfig adam{cfg_.lr};
  if (cfg_.grad_clip > 0.0) {
    approx::clip_grad_norm(critic_store_, cfg_.grad_clip);
    approx::clip_grad_norm(actor_store_, cfg_.grad_clip);
  }
  approx::adam_update(critic_store_, adam);
  approx::adam_update(actor_store_, adam);
  approx::adam_update(alpha_store_, adam);
  approx::soft_update(target_store_, critic_store_, cfg_.tau);
  if (!critic_store_.all_finite() || !actor_store_.all_finite() || !alpha_store_.all_finite())
    throw NumericError("SAC update " + std::to_string(step) + ": parameters became non-finite");

  double entropy = 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t < log_probs.size(); ++t) {
    entropy -= (log_probs[t].array() * batch.mask[t].array()).sum();
    total += batch.mask[t].sum();
  }
  return {{"critic", lc}, {"actor", la}, {"alpha", lt}, {"alpha_value", alpha()},
          {"entropy", entropy / total}};
}

void SacAgent::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  actor_store_.write(out);
  critic_store_.write(out);
  target_store_.write(out);
  alpha_store_.write(out);
}

void SacAgent::load(std::istream& in) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a SAC checkpoint");
  ParamStore actor = ParamStore::read(in);
  ParamStore critic = ParamStore::read(in);
  ParamStore target = ParamStore::read(in);
  ParamStore alpha = ParamStore::read(in);
  if (!actor.same_schema(actor_store_) || !critic.same_schema(critic_store_) ||
      !target.same_schema(target_store_) || !alpha.same_schema(alpha_store_))
    throw FormatError("SAC checkpoint does not match the configured network shapes");
  actor_store_ = std::move(actor);
  critic_store_ = std::move(critic);
  target_store_ = std::move(target);
  alpha_store_ = std::move(alpha);
}

}  // namespace endonav::sac
