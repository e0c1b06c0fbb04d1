#include "endonav/approx/param_store.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "endonav/errors.hpp"

namespace endonav::approx {
namespace {

constexpr char kMagic[8] = {'E', 'N', 'V', 'P', 'A', 'R', '0', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("parameter checkpoint truncated");
  return v;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void get_matrix(std::istream& in, Matrix& m) {
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw FormatError("parameter checkpoint truncated");
}

}  // namespace

std::size_t ParamStore::add(std::string name, Matrix init) {
  Param p;
  p.name = std::move(name);
  p.grad = Matrix::Zero(init.rows(), init.cols());
  p.m = p.grad;
  p.v = p.grad;
  p.value = std::move(init);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

bool ParamStore::all_finite() const {
  for (const auto& p : params_)
    if (!p.value.allFinite()) return false;
  return true;
}

bool ParamStore::same_schema(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = other.params_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols())
      return false;
  }
  return true;
}

Eigen::VectorXd ParamStore::flat_values() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(scalar_count()));
  Eigen::Index k = 0;
  for (const auto& p : params_) {
    out.segment(k, p.value.size()) = p.value.reshaped();
    k += p.value.size();
  }
  return out;
}

Eigen::VectorXd ParamStore::flat_grads() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(scalar_count()));
  Eigen::Index k = 0;
  for (const auto& p : params_) {
    out.segment(k, p.grad.size()) = p.grad.reshaped();
    k += p.grad.size();
  }
  return out;
}

void ParamStore::set_flat_values(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(scalar_count()))
    throw ShapeError("flat parameter vector has the wrong length");
  Eigen::Index k = 0;
  for (auto& p : params_) {
    p.value.reshaped() = flat.segment(k, p.value.size());
    k += p.value.size();
  }
}

void ParamStore::write(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint64_t>(out, steps_);
  put<std::uint64_t>(out, params_.size());
  for (const auto& p : params_) {
    put<std::uint64_t>(out, p.name.size());
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::int64_t>(out, p.value.rows());
    put<std::int64_t>(out, p.value.cols());
    put_matrix(out, p.value);
    put_matrix(out, p.m);
    put_matrix(out, p.v);
  }
}

ParamStore ParamStore::read(std::istream& in) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a parameter checkpoint (bad magic or version)");
  ParamStore s;
  s.steps_ = get<std::uint64_t>(in);
  const auto n = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto len = get<std::uint64_t>(in);
    if (len > 4096) throw FormatError("parameter name too long");
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    const auto rows = get<std::int64_t>(in);
    const auto cols = get<std::int64_t>(in);
    if (rows < 0 || cols < 0 || rows * cols > (std::int64_t{1} << 32))
      throw FormatError("bad parameter shape in checkpoint");
    Matrix value(rows, cols);
    get_matrix(in, value);
    const std::size_t idx = s.add(std::move(name), std::move(value));
    get_matrix(in, s.params_[idx].m);
    get_matrix(in, s.params_[idx].v);
  }
  return s;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (!a.same_schema(b) || a.steps_ != b.steps_) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    const auto& p = a.params_[i];
    const auto& q = b.params_[i];
    if (p.value != q.value || p.m != q.m || p.v != q.v) return false;
  }
  return true;
}

void adam_update(ParamStore& store, const AdamConfig& cfg) {
  ++store.steps_;
  const double t = static_cast<double>(store.steps_);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& p : store.params_) {
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      throw ShapeError("gradient shape mismatch for '" + p.name + "'");
    p.m = cfg.beta1 * p.m + (1.0 - cfg.beta1) * p.grad;
    p.v = cfg.beta2 * p.v + (1.0 - cfg.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= cfg.lr * (p.m.array() / c1) / ((p.v.array() / c2).sqrt() + cfg.eps);
  }
}

double clip_grad_norm(ParamStore& store, double max_norm) {
  double sq = 0.0;
  for (const auto& p : store.params()) sq += p.grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (std::size_t i = 0; i < store.size(); ++i) store.grad(i) *= f;
  }
  return norm;
}

void soft_update(ParamStore& target, const ParamStore& source, double tau) {
  if (!target.same_schema(source)) throw ShapeError("soft_update: parameter schemas differ");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ArgumentError("soft_update: tau must lie in [0, 1]");
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (tau == 1.0)
      target.value(i) = source.value(i);
    else if (tau != 0.0)
      target.value(i) = (1.0 - tau) * target.value(i) + tau * source.value(i);
  }
}

}  // namespace endonav::approx
