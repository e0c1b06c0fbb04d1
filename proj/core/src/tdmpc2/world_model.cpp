#include "endonav/tdmpc2/world_model.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "endonav/errors.hpp"

namespace endonav::tdmpc2 {
namespace {

using approx::Activation;
using approx::Lstm;
using approx::Mlp;

constexpr auto kA = static_cast<Eigen::Index>(env::kActionDim);
constexpr auto kObs = static_cast<Eigen::Index>(env::kObsDim);
constexpr auto kTasks = static_cast<Eigen::Index>(env::kTaskCount);
constexpr char kMagic[8] = {'E', 'N', 'V', 'W', 'M', 'D', '0', '1'};

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

Var sum_all(Tape& tape, const std::vector<Var>& terms) {
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = tape.add(total, terms[i]);
  return total;
}

}  // namespace

void validate(const WorldModelConfig& cfg) {
  if (cfg.lstm_hidden <= 0 || cfg.latent <= 0 || cfg.task_dim <= 0)
    throw ArgumentError("world model: sizes must be positive");
  if (cfg.ensemble < 2) throw ArgumentError("world model: ensemble needs at least 2 members");
  for (auto w : cfg.hidden)
    if (w <= 0) throw ArgumentError("world model: hidden widths must be positive");
  if (!(cfg.log_std_min < cfg.log_std_max)) throw ArgumentError("world model: log_std bounds reversed");
}

WorldModel::WorldModel(const WorldModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg_);
  Rng rng(seed);
  const Eigen::Index Z = cfg_.latent;
  const Eigen::Index T = cfg_.task_dim;
  lstm_ = Lstm::create(model_store_, "embed.lstm", kObs, cfg_.lstm_hidden, rng);
  project_ = approx::Dense::create(model_store_, "embed.project", cfg_.lstm_hidden + T, Z,
                                   Activation::Tanh, rng);
  dynamics_ = Mlp::create(model_store_, "dynamics", Z + kA + T, cfg_.hidden, Z, Activation::Relu, rng);
  reward_ = Mlp::create(model_store_, "reward", Z + kA + T, cfg_.hidden, 1, Activation::Relu, rng);
  task_table_ = model_store_.add("task_embedding", approx::glorot(T, kTasks, rng));
  for (std::size_t k = 0; k < cfg_.ensemble; ++k)
    q_.push_back(Mlp::create(q_store_, "q" + std::to_string(k), Z + kA + T, cfg_.hidden, 1,
                             Activation::Relu, rng));
  q_target_store_ = q_store_;
  pi_ = Mlp::create(pi_store_, "policy", Z + T, cfg_.hidden, 2 * kA, Activation::Relu, rng, 0.1);
}

Matrix WorldModel::onehot_cols(TaskId task, Eigen::Index n) const {
  Matrix m = Matrix::Zero(kTasks, n);
  m.row(static_cast<Eigen::Index>(env::task_index(task))).setOnes();
  return m;
}

Matrix WorldModel::task_embedding(const Matrix& onehot) const {
  return model_store_.value(task_table_) * onehot;
}

Matrix WorldModel::latent_from_hidden(const Matrix& h, const Matrix& e) const {
  Matrix in(h.rows() + e.rows(), h.cols());
  in << h, e;
  return project_.infer(model_store_, in);
}

Matrix WorldModel::za(const Matrix& z, const Matrix& a, const Matrix& e) const {
  Matrix in(z.rows() + a.rows() + e.rows(), z.cols());
  in << z, a, e;
  return in;
}

Eigen::VectorXd WorldModel::encode_step(const env::Observation& obs, TaskId task,
                                        RecurrentState& state) const {
  state = lstm_.infer_step(model_store_, obs.flatten(), state);
  return latent_from_hidden(state.h, task_embedding(onehot_cols(task, 1))).col(0);
}

Eigen::VectorXd WorldModel::encode(const std::vector<env::Observation>& window, TaskId task) const {
  if (window.empty()) throw ArgumentError("encode: empty observation window");
  RecurrentState s = initial_state();
  Eigen::VectorXd z;
  for (const auto& o : window) z = encode_step(o, task, s);
  return z;
}

std::pair<Eigen::VectorXd, double> WorldModel::imagine(const Eigen::VectorXd& z, const Action& a,
                                                       TaskId task) const {
  Matrix am(kA, 1);
  for (Eigen::Index i = 0; i < kA; ++i) am(i, 0) = a[static_cast<std::size_t>(i)];
  return {next(z, am, task).col(0), reward(z, am, task)(0, 0)};
}

Matrix WorldModel::next(const Matrix& z, const Matrix& a, TaskId task) const {
  const Matrix e = task_embedding(onehot_cols(task, z.cols()));
  return dynamics_.infer(model_store_, za(z, a, e)).array().tanh();
}

Matrix WorldModel::reward(const Matrix& z, const Matrix& a, TaskId task) const {
  const Matrix e = task_embedding(onehot_cols(task, z.cols()));
  return reward_.infer(model_store_, za(z, a, e));
}

Matrix WorldModel::q_values(const ParamStore& store, const Matrix& z, const Matrix& a,
                            const Matrix& e) const {
  const Matrix in = za(z, a, e);
  Matrix q(static_cast<Eigen::Index>(q_.size()), z.cols());
  for (std::size_t k = 0; k < q_.size(); ++k) q.row(static_cast<Eigen::Index>(k)) = q_[k].infer(store, in);
  return q;
}

Matrix WorldModel::value(const Matrix& z, const Matrix& a, TaskId task, Rng& rng) const {
  const auto E = q_.size();
  const std::size_t i = rng.below(E);
  std::size_t j = rng.below(E - 1);
  if (j >= i) ++j;
  const Matrix e = task_embedding(onehot_cols(task, z.cols()));
  const Matrix in = za(z, a, e);
  return q_[i].infer(q_store_, in).cwiseMin(q_[j].infer(q_store_, in));
}

std::pair<Matrix, Matrix> WorldModel::policy_head(const Matrix& z, const Matrix& e) const {
  Matrix in(z.rows() + e.rows(), z.cols());
  in << z, e;
  const Matrix out = pi_.infer(pi_store_, in);
  return {out.topRows(kA), approx::bounded_log_std(out.bottomRows(kA), cfg_.log_std_min, cfg_.log_std_max)};
}

Matrix WorldModel::policy(const Matrix& z, TaskId task, Rng& rng) const {
  const auto [mean, log_std] = policy_head(z, task_embedding(onehot_cols(task, z.cols())));
  Matrix a(kA, z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    for (Eigen::Index i = 0; i < kA; ++i)
      a(i, j) = std::tanh(mean(i, j) + std::exp(log_std(i, j)) * rng.normal());
  return a;
}

Matrix WorldModel::policy_mean(const Matrix& z, TaskId task) const {
  return policy_head(z, task_embedding(onehot_cols(task, z.cols()))).first.array().tanh();
}

RecurrentState WorldModel::burn_in(const SequenceBatch& batch) const {
  RecurrentState s = RecurrentState::zeros(cfg_.lstm_hidden, static_cast<Eigen::Index>(batch.batch));
  for (std::size_t t = 0; t < batch.burn_obs.size(); ++t) {
    if (batch.burn_mask[t].sum() == 0.0) continue;
    const RecurrentState n = lstm_.infer_step(model_store_, batch.burn_obs[t], s);
    s.h = blend(n.h, s.h, batch.burn_mask[t]);
    s.c = blend(n.c, s.c, batch.burn_mask[t]);
  }
  return s;
}

std::vector<Matrix> WorldModel::embed_sequence(const SequenceBatch& batch) const {
  const Matrix e = task_embedding(batch.task_onehot);
  RecurrentState s = burn_in(batch);
  std::vector<Matrix> zs;
  zs.reserve(batch.obs.size());
  for (const auto& o : batch.obs) {
    s = lstm_.infer_step(model_store_, o, s);
    zs.push_back(latent_from_hidden(s.h, e));
  }
  return zs;
}

JointTargets WorldModel::compute_targets(const SequenceBatch& batch, const std::vector<Matrix>& noise,
                                         const LossWeights& w) const {
  const std::vector<Matrix> zs = embed_sequence(batch);
  const Matrix e = task_embedding(batch.task_onehot);
  JointTargets out;
  for (std::size_t t = 0; t < batch.length; ++t) {
    const Matrix& zn = zs[t + 1];
    out.latent.push_back(zn);
    const auto [mean, log_std] = policy_head(zn, e);
    const Matrix a = (mean.array() + log_std.array().exp() * noise[t].array()).tanh().matrix();
    const Matrix q = q_values(q_target_store_, zn, a, e);
    const Matrix min_q = q.colwise().minCoeff();
    out.value.push_back(batch.reward[t] + (w.gamma * (1.0 - batch.done[t].array()) * min_q.array()).matrix());
  }
  return out;
}

JointLoss WorldModel::joint_loss(Tape& tape, const SequenceBatch& batch, const JointTargets& targets,
                                 const LossWeights& w) {
  const double inv_total = 1.0 / mask_total(batch);
  const auto lstm = lstm_.bind(tape, model_store_);
  const auto project = project_.bind(tape, model_store_);
  const auto dyn = dynamics_.bind(tape, model_store_);
  const auto rew = reward_.bind(tape, model_store_);
  std::vector<Mlp::Bound> qs;
  for (const auto& q : q_) qs.push_back(q.bind(tape, q_store_));
  const Var e = tape.matmul(tape.param(model_store_, task_table_), tape.constant(batch.task_onehot));

  const RecurrentState s0 = burn_in(batch);
  const Lstm::TapeState s = lstm_.step(tape, lstm, tape.constant(batch.obs[0]),
                                       {tape.constant(s0.h), tape.constant(s0.c)});
  Var z = project_.forward(tape, project, tape.concat_rows({s.h, e}));

  JointLoss out;
  std::vector<Var> cons, rews, vals;
  const double inv_latent = 1.0 / static_cast<double>(cfg_.latent);
  const double inv_ens = 1.0 / static_cast<double>(q_.size());
  double decay = 1.0;
  for (std::size_t t = 0; t < batch.length; ++t) {
    out.rollout.push_back(tape.value(z));
    const Var mask = tape.constant(batch.mask[t]);
    const Var in = tape.concat_rows({z, tape.constant(batch.action[t]), e});
    const Var r_hat = reward_.forward(tape, rew, in);
    rews.push_back(tape.scale(
        tape.sum(tape.mul(tape.square(tape.sub(r_hat, tape.constant(batch.reward[t]))), mask)), decay));
    const Var y = tape.constant(targets.value[t]);
    for (std::size_t k = 0; k < q_.size(); ++k) {
      const Var q = q_[k].forward(tape, qs[k], in);
      vals.push_back(tape.scale(tape.sum(tape.mul(tape.square(tape.sub(q, y)), mask)), decay * inv_ens));
    }
    const Var z_next = tape.tanh(dynamics_.forward(tape, dyn, in));
    const Var diff = tape.sum_rows(tape.square(tape.sub(z_next, tape.constant(targets.latent[t]))));
    cons.push_back(tape.scale(tape.sum(tape.mul(diff, mask)), decay * inv_latent));
    z = z_next;
    decay *= w.rho;
  }
  const Var lc = tape.scale(sum_all(tape, cons), inv_total);
  const Var lr = tape.scale(sum_all(tape, rews), inv_total);
  const Var lv = tape.scale(sum_all(tape, vals), inv_total);
  out.consistency = tape.value(lc)(0, 0);
  out.reward = tape.value(lr)(0, 0);
  out.value = tape.value(lv)(0, 0);
  out.total = tape.add(tape.add(tape.scale(lc, w.consistency), tape.scale(lr, w.reward)),
                       tape.scale(lv, w.value));
  return out;
}

Var WorldModel::policy_loss(Tape& tape, const std::vector<Matrix>& latents, const SequenceBatch& batch,
                            const std::vector<Matrix>& noise, const LossWeights& w) {
  const double inv_total = 1.0 / mask_total(batch);
  const auto pi = pi_.bind(tape, pi_store_);
  std::vector<Mlp::Bound> qs;
  for (const auto& q : q_) qs.push_back(q.bind(tape, q_store_, true));
  const Var e = tape.constant(task_embedding(batch.task_onehot));
  std::vector<Var> terms;
  double decay = 1.0;
  for (std::size_t t = 0; t < latents.size(); ++t) {
    const Var z = tape.constant(latents[t]);
    const Var out = pi_.forward(tape, pi, tape.concat_rows({z, e}));
    const Var mean = tape.slice_rows(out, 0, kA);
    const Var log_std = approx::bounded_log_std(tape, tape.slice_rows(out, kA, kA), cfg_.log_std_min,
                                                cfg_.log_std_max);
    const Var u = tape.add(mean, tape.mul(tape.exp(log_std), tape.constant(noise[t])));
    const Var a = tape.tanh(u);
    const Var logp = approx::squashed_log_prob(tape, noise[t], log_std, u);
    const Var in = tape.concat_rows({z, a, e});
    Var min_q = q_[0].forward(tape, qs[0], in);
    for (std::size_t k = 1; k < q_.size(); ++k) min_q = tape.min(min_q, q_[k].forward(tape, qs[k], in));
    const Var term = tape.sub(tape.scale(logp, w.entropy), min_q);
    terms.push_back(tape.scale(tape.sum(tape.mul(term, tape.constant(batch.mask[t]))), decay));
    decay *= w.rho;
  }
  return tape.scale(sum_all(tape, terms), inv_total);
}

void WorldModel::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  model_store_.write(out);
  q_store_.write(out);
  q_target_store_.write(out);
  pi_store_.write(out);
}

void WorldModel::load(std::istream& in) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a world-model checkpoint");
  ParamStore model = ParamStore::read(in);
  ParamStore q = ParamStore::read(in);
  ParamStore qt = ParamStore::read(in);
  ParamStore pi = ParamStore::read(in);
  if (!model.same_schema(model_store_) || !q.same_schema(q_store_) || !qt.same_schema(q_target_store_) ||
      !pi.same_schema(pi_store_))
    throw FormatError("world-model checkpoint does not match the configured network shapes");
  model_store_ = std::move(model);
  q_store_ = std::move(q);
  q_target_store_ = std::move(qt);
  pi_store_ = std::move(pi);
}

}  // namespace endonav::tdmpc2
