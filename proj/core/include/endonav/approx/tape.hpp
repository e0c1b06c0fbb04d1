#pragma once

// Reverse-mode differentiation over column-batched matrices. Every value is a
// (features x batch) matrix; a 1x1 value is a scalar. Nodes are recorded in
// evaluation order and backward() walks them in reverse.

#include <Eigen/Core>

#include <cstddef>
#include <vector>

#include "endonav/approx/param_store.hpp"

namespace endonav::approx {

struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  Var constant(Matrix value);
  // Leaf bound to store.value(index); backward() adds into store.grad(index).
  Var param(ParamStore& store, std::size_t index);

  Var matmul(Var a, Var b);
  // b may be a column (rows x 1) broadcast over a's columns, or a 1x1 scalar.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise; b may be a row (1 x cols) broadcast over rows
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var neg(Var a) { return scale(a, -1.0); }

  Var tanh(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var exp(Var a);
  Var softplus(Var a);
  Var square(Var a);
  Var min(Var a, Var b);

  Var concat_rows(const std::vector<Var>& parts);
  Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);

  Var sum(Var a);       // -> 1x1
  Var sum_rows(Var a);  // -> 1 x cols
  Var mean(Var a);      // -> 1x1

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and propagates. Throws ShapeError for a
  // non-scalar loss.
  void backward(Var loss);

 private:
  enum class Op {
    Constant, Param, MatMul, Add, AddCol, AddScalarVar, Sub, Mul, MulRow, Scale, AddScalar,
    Tanh, Sigmoid, Relu, Exp, Softplus, Square, Min, Concat, Slice, Sum, SumRows, Mean
  };
  struct Node {
    Op op = Op::Constant;
    Matrix value;
    Matrix grad;
    std::size_t a = 0;
    std::size_t b = 0;
    std::vector<std::size_t> parts;
    double c = 0.0;
    Eigen::Index offset = 0;
    ParamStore* store = nullptr;
    std::size_t param = 0;
    bool needs_grad = false;
  };

  Var push(Node node);
  Matrix& grad_of(std::size_t id);

  std::vector<Node> nodes_;
};

}  // namespace endonav::approx
