#pragma once

// Dense, MLP and LSTM building blocks. Each layer only holds indices into a
// ParamStore, so the same layout can be evaluated against a target copy of
// the store. `bind` pulls the parameters onto a tape once (as trainable
// leaves, or as constants when frozen) so unrolled sequences reuse them.

#include <string>
#include <utility>
#include <vector>

#include "endonav/approx/param_store.hpp"
#include "endonav/approx/tape.hpp"
#include "endonav/rng.hpp"

namespace endonav::approx {

enum class Activation { Linear, Tanh, Relu };

Matrix apply(Activation act, const Matrix& x);
Var apply(Tape& tape, Activation act, Var x);

// Uniform(-limit, limit) with limit = gain * sqrt(6 / (fan_in + fan_out)).
Matrix glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng, double gain = 1.0);

struct Dense {
  std::size_t w = 0;
  std::size_t b = 0;
  Eigen::Index in = 0;
  Eigen::Index out = 0;
  Activation act = Activation::Linear;

  struct Bound {
    Var w;
    Var b;
  };

  static Dense create(ParamStore& store, const std::string& name, Eigen::Index in,
                      Eigen::Index out, Activation act, Rng& rng, double gain = 1.0);

  Bound bind(Tape& tape, ParamStore& store, bool frozen = false) const;
  Var forward(Tape& tape, const Bound& p, Var x) const;
  Matrix infer(const ParamStore& store, const Matrix& x) const;
};

struct Mlp {
  std::vector<Dense> layers;

  using Bound = std::vector<Dense::Bound>;

  // Hidden layers use `hidden`, the last layer is linear. The output layer is
  // initialised with `out_gain`.
  static Mlp create(ParamStore& store, const std::string& name, Eigen::Index in,
                    const std::vector<Eigen::Index>& widths, Eigen::Index out, Activation hidden,
                    Rng& rng, double out_gain = 1.0);

  Eigen::Index in() const { return layers.front().in; }
  Eigen::Index out() const { return layers.back().out; }
  Bound bind(Tape& tape, ParamStore& store, bool frozen = false) const;
  Var forward(Tape& tape, const Bound& p, Var x) const;
  Matrix infer(const ParamStore& store, const Matrix& x) const;
};

// Hidden and cell state, each (hidden x batch).
struct RecurrentState {
  Matrix h;
  Matrix c;

  static RecurrentState zeros(Eigen::Index hidden, Eigen::Index batch = 1) {
    return {Matrix::Zero(hidden, batch), Matrix::Zero(hidden, batch)};
  }
  friend bool operator==(const RecurrentState&, const RecurrentState&) = default;
};

// Gate order in the stacked weights: input, forget, candidate, output.
struct Lstm {
  std::size_t wx = 0;
  std::size_t wh = 0;
  std::size_t b = 0;
  Eigen::Index in = 0;
  Eigen::Index hidden = 0;

  struct Bound {
    Var wx;
    Var wh;
    Var b;
  };
  struct TapeState {
    Var h;
    Var c;
  };

  static Lstm create(ParamStore& store, const std::string& name, Eigen::Index in,
                     Eigen::Index hidden, Rng& rng);

  Bound bind(Tape& tape, ParamStore& store, bool frozen = false) const;
  TapeState step(Tape& tape, const Bound& p, Var x, const TapeState& s) const;
  // Returns the new hidden state (also the layer output).
  RecurrentState infer_step(const ParamStore& store, const Matrix& x,
                            const RecurrentState& s) const;
};

// Squashed Gaussian a = tanh(u), u = mean + exp(log_std) * eps. Column-wise
// log-density sum with the tanh Jacobian written as
// 2 (log 2 - u - softplus(-2u)) for numerical stability, (1 x B).
Matrix squashed_log_prob(const Matrix& eps, const Matrix& log_std, const Matrix& u);
Var squashed_log_prob(Tape& tape, const Matrix& eps, Var log_std, Var u);

// lo + (hi - lo) (tanh(raw) + 1) / 2
Matrix bounded_log_std(const Matrix& raw, double lo, double hi);
Var bounded_log_std(Tape& tape, Var raw, double lo, double hi);

}  // namespace endonav::approx
