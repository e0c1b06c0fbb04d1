#pragma once

// Named parameter arrays with gradient buffers and Adam moments.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace endonav::approx {

using Matrix = Eigen::MatrixXd;

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class ParamStore {
 public:
  struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix m;
    Matrix v;
  };

  std::size_t add(std::string name, Matrix init);

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  Param& at(std::size_t i) { return params_.at(i); }
  const Param& at(std::size_t i) const { return params_.at(i); }
  const Matrix& value(std::size_t i) const { return params_[i].value; }
  Matrix& value(std::size_t i) { return params_[i].value; }
  Matrix& grad(std::size_t i) { return params_[i].grad; }
  const Matrix& grad(std::size_t i) const { return params_[i].grad; }
  const std::vector<Param>& params() const { return params_; }

  std::uint64_t steps() const { return steps_; }

  void zero_grad();
  bool all_finite() const;
  // True when names and shapes match parameter by parameter.
  bool same_schema(const ParamStore& other) const;

  // Flat views used by gradient checks.
  Eigen::VectorXd flat_values() const;
  Eigen::VectorXd flat_grads() const;
  void set_flat_values(const Eigen::VectorXd& flat);

  void write(std::ostream& out) const;
  static ParamStore read(std::istream& in);

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  friend void adam_update(ParamStore&, const AdamConfig&);
  std::vector<Param> params_;
  std::uint64_t steps_ = 0;
};

// One bias-corrected Adam step using the accumulated gradients.
void adam_update(ParamStore& store, const AdamConfig& cfg);

// Clips the global gradient norm to max_norm; returns the norm before clipping.
double clip_grad_norm(ParamStore& store, double max_norm);

// target <- (1 - tau) target + tau source. Throws ShapeError on schema mismatch.
void soft_update(ParamStore& target, const ParamStore& source, double tau);

}  // namespace endonav::approx
