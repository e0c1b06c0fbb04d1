#include "endonav/approx/layers.hpp"

#include <cmath>
#include <numbers>

#include "endonav/errors.hpp"

namespace endonav::approx {
namespace {

Matrix sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

void check_rows(const Matrix& x, Eigen::Index rows, const char* what) {
  if (x.rows() != rows)
    throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + " input rows, got " +
                     std::to_string(x.rows()));
}

}  // namespace

Matrix apply(Activation act, const Matrix& x) {
  switch (act) {
    case Activation::Linear: return x;
    case Activation::Tanh: return x.array().tanh();
    case Activation::Relu: return x.cwiseMax(0.0);
  }
  return x;
}

Var apply(Tape& tape, Activation act, Var x) {
  switch (act) {
    case Activation::Linear: return x;
    case Activation::Tanh: return tape.tanh(x);
    case Activation::Relu: return tape.relu(x);
  }
  return x;
}

Matrix glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng, double gain) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-limit, limit);
  return m;
}

Dense Dense::create(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
                    Activation act, Rng& rng, double gain) {
  if (in <= 0 || out <= 0) throw ShapeError("dense layer '" + name + "' needs positive sizes");
  Dense d;
  d.in = in;
  d.out = out;
  d.act = act;
  d.w = store.add(name + ".w", glorot(out, in, rng, gain));
  d.b = store.add(name + ".b", Matrix::Zero(out, 1));
  return d;
}

Dense::Bound Dense::bind(Tape& tape, ParamStore& store, bool frozen) const {
  if (frozen) return {tape.constant(store.value(w)), tape.constant(store.value(b))};
  return {tape.param(store, w), tape.param(store, b)};
}

Var Dense::forward(Tape& tape, const Bound& p, Var x) const {
  check_rows(tape.value(x), in, "dense");
  return apply(tape, act, tape.add(tape.matmul(p.w, x), p.b));
}

Matrix Dense::infer(const ParamStore& store, const Matrix& x) const {
  check_rows(x, in, "dense");
  Matrix y = store.value(w) * x;
  y.colwise() += store.value(b).col(0);
  return apply(act, y);
}

Mlp Mlp::create(ParamStore& store, const std::string& name, Eigen::Index in,
                const std::vector<Eigen::Index>& widths, Eigen::Index out, Activation hidden,
                Rng& rng, double out_gain) {
  Mlp m;
  Eigen::Index prev = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    m.layers.push_back(
        Dense::create(store, name + ".l" + std::to_string(i), prev, widths[i], hidden, rng));
    prev = widths[i];
  }
  m.layers.push_back(Dense::create(store, name + ".out", prev, out, Activation::Linear, rng, out_gain));
  return m;
}

Mlp::Bound Mlp::bind(Tape& tape, ParamStore& store, bool frozen) const {
  Bound out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back(l.bind(tape, store, frozen));
  return out;
}

Var Mlp::forward(Tape& tape, const Bound& p, Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) x = layers[i].forward(tape, p[i], x);
  return x;
}

Matrix Mlp::infer(const ParamStore& store, const Matrix& x) const {
  Matrix y = x;
  for (const auto& l : layers) y = l.infer(store, y);
  return y;
}

Lstm Lstm::create(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index hidden,
                  Rng& rng) {
  if (in <= 0 || hidden <= 0) throw ShapeError("lstm '" + name + "' needs positive sizes");
  Lstm l;
  l.in = in;
  l.hidden = hidden;
  l.wx = store.add(name + ".wx", glorot(4 * hidden, in, rng));
  l.wh = store.add(name + ".wh", glorot(4 * hidden, hidden, rng));
  Matrix b = Matrix::Zero(4 * hidden, 1);
  b.middleRows(hidden, hidden).setOnes();  // forget gate starts open
  l.b = store.add(name + ".b", b);
  return l;
}

Lstm::Bound Lstm::bind(Tape& tape, ParamStore& store, bool frozen) const {
  if (frozen)
    return {tape.constant(store.value(wx)), tape.constant(store.value(wh)),
            tape.constant(store.value(b))};
  return {tape.param(store, wx), tape.param(store, wh), tape.param(store, b)};
}

Lstm::TapeState Lstm::step(Tape& tape, const Bound& p, Var x, const TapeState& s) const {
  check_rows(tape.value(x), in, "lstm");
  check_rows(tape.value(s.h), hidden, "lstm state");
  const Var z = tape.add(tape.add(tape.matmul(p.wx, x), tape.matmul(p.wh, s.h)), p.b);
  const Var i = tape.sigmoid(tape.slice_rows(z, 0, hidden));
  const Var f = tape.sigmoid(tape.slice_rows(z, hidden, hidden));
  const Var g = tape.tanh(tape.slice_rows(z, 2 * hidden, hidden));
  const Var o = tape.sigmoid(tape.slice_rows(z, 3 * hidden, hidden));
  const Var c = tape.add(tape.mul(f, s.c), tape.mul(i, g));
  const Var h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

RecurrentState Lstm::infer_step(const ParamStore& store, const Matrix& x,
                                const RecurrentState& s) const {
  check_rows(x, in, "lstm");
  check_rows(s.h, hidden, "lstm state");
  Matrix z = store.value(wx) * x + store.value(wh) * s.h;
  z.colwise() += store.value(b).col(0);
  const Matrix i = sigmoid(z.middleRows(0, hidden));
  const Matrix f = sigmoid(z.middleRows(hidden, hidden));
  const Matrix g = z.middleRows(2 * hidden, hidden).array().tanh();
  const Matrix o = sigmoid(z.middleRows(3 * hidden, hidden));
  RecurrentState out;
  out.c = f.cwiseProduct(s.c) + i.cwiseProduct(g);
  out.h = o.cwiseProduct(Matrix(out.c.array().tanh()));
  return out;
}

namespace {
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
}  // namespace

Matrix squashed_log_prob(const Matrix& eps, const Matrix& log_std, const Matrix& u) {
  const Matrix per = (-0.5 * eps.array().square() - kHalfLog2Pi - log_std.array() -
                      2.0 * (std::log(2.0) - u.array() - (-2.0 * u.array()).unaryExpr(&softplus)))
                         .matrix();
  return per.colwise().sum();
}

Var squashed_log_prob(Tape& tape, const Matrix& eps, Var log_std, Var u) {
  // sum(c - log_std + 2u + 2 softplus(-2u)), c = -eps^2/2 - log(2pi)/2 - 2 log 2
  const Matrix c = (-0.5 * eps.array().square() - kHalfLog2Pi - 2.0 * std::log(2.0)).matrix();
  const Var per = tape.add(tape.add(tape.sub(tape.constant(c), log_std), tape.scale(u, 2.0)),
                           tape.scale(tape.softplus(tape.scale(u, -2.0)), 2.0));
  return tape.sum_rows(per);
}

Matrix bounded_log_std(const Matrix& raw, double lo, double hi) {
  return (lo + 0.5 * (hi - lo) * (raw.array().tanh() + 1.0)).matrix();
}

Var bounded_log_std(Tape& tape, Var raw, double lo, double hi) {
  return tape.add_scalar(tape.scale(tape.add_scalar(tape.tanh(raw), 1.0), 0.5 * (hi - lo)), lo);
}

}  // namespace endonav::approx
