#include "endonav/approx/tape.hpp"

#include <cmath>
#include <string>

#include "endonav/errors.hpp"

namespace endonav::approx {
namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

double softplus_scalar(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Matrix& Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(ParamStore& store, std::size_t index) {
  Node n;
  n.op = Op::Param;
  n.value = store.value(index);
  n.store = &store;
  n.param = index;
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.rows()) throw ShapeError("matmul " + shape(A) + " * " + shape(B));
  Node n;
  n.op = Op::MatMul;
  n.value = A * B;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  Node n;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = requires_grad(a) || requires_grad(b);
  if (A.rows() == B.rows() && A.cols() == B.cols()) {
    n.op = Op::Add;
    n.value = A + B;
  } else if (B.rows() == 1 && B.cols() == 1) {
    n.op = Op::AddScalarVar;
    n.value = A.array() + B(0, 0);
  } else if (B.cols() == 1 && B.rows() == A.rows()) {
    n.op = Op::AddCol;
    n.value = A.colwise() + B.col(0);
  } else {
    throw ShapeError("add " + shape(A) + " + " + shape(B));
  }
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw ShapeError("sub " + shape(A) + " - " + shape(B));
  Node n;
  n.op = Op::Sub;
  n.value = A - B;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  Node n;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = requires_grad(a) || requires_grad(b);
  if (A.rows() == B.rows() && A.cols() == B.cols()) {
    n.op = Op::Mul;
    n.value = A.cwiseProduct(B);
  } else if (B.rows() == 1 && B.cols() == A.cols()) {
    n.op = Op::MulRow;
    n.value = A.array().rowwise() * B.row(0).array();
  } else {
    throw ShapeError("mul " + shape(A) + " .* " + shape(B));
  }
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::Scale;
  n.value = value(a) * c;
  n.a = a.id;
  n.c = c;
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

Var Tape::add_scalar(Var a, double c) {
  Node n;
  n.op = Op::AddScalar;
  n.value = value(a).array() + c;
  n.a = a.id;
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::Tanh;
  n.value = value(a).array().tanh();
  n.a = a.id;
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::Sigmoid;
  n.value = value(a).unaryExpr(&sigmoid_scalar);
  n.a = a.id;
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  Node n;
  n.op = Op::Relu;
  n.value = value(a).cwiseMax(0.0);
  n.a = a.id;
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

Var Tape::exp(Var a) {
  Node n;
  n.op = Op::Exp;
  n.value = value(a).array().exp();
  n.a = a.id;
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

Var Tape::softplus(Var a) {
  Node n;
  n.op = Op::Softplus;
  n.value = value(a).unaryExpr(&softplus_scalar);
  n.a = a.id;
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

Var Tape::square(Var a) {
  Node n;
  n.op = Op::Square;
  n.value = value(a).array().square();
  n.a = a.id;
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

Var Tape::min(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw ShapeError("min " + shape(A) + " vs " + shape(B));
  Node n;
  n.op = Op::Min;
  n.value = A.cwiseMin(B);
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  const Eigen::Index cols = value(parts[0]).cols();
  Eigen::Index rows = 0;
  Node n;
  n.op = Op::Concat;
  for (Var p : parts) {
    if (value(p).cols() != cols) throw ShapeError("concat_rows column mismatch");
    rows += value(p).rows();
    n.parts.push_back(p.id);
    n.needs_grad = n.needs_grad || requires_grad(p);
  }
  n.value.resize(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    n.value.middleRows(r, value(p).rows()) = value(p);
    r += value(p).rows();
  }
  return push(std::move(n));
}

Var Tape::slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& A = value(a);
  if (start < 0 || count < 0 || start + count > A.rows())
    throw ShapeError("slice_rows out of range on " + shape(A));
  Node n;
  n.op = Op::Slice;
  n.value = A.middleRows(start, count);
  n.a = a.id;
  n.offset = start;
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::Sum;
  n.value = Matrix::Constant(1, 1, value(a).sum());
  n.a = a.id;
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

Var Tape::sum_rows(Var a) {
  Node n;
  n.op = Op::SumRows;
  n.value = value(a).colwise().sum();
  n.a = a.id;
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  const Matrix& A = value(a);
  if (A.size() == 0) throw ShapeError("mean of an empty value");
  Node n;
  n.op = Op::Mean;
  n.value = Matrix::Constant(1, 1, A.mean());
  n.a = a.id;
  n.c = 1.0 / static_cast<double>(A.size());
  n.needs_grad = requires_grad(a);
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  if (value(loss).size() != 1) throw ShapeError("backward needs a scalar loss, got " + shape(value(loss)));
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_of(loss.id)(0, 0) = 1.0;

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    const Matrix& g = n.grad;
    const auto wants = [&](std::size_t k) { return nodes_[k].needs_grad; };
    switch (n.op) {
      case Op::Constant:
        break;
      case Op::Param:
        n.store->grad(n.param) += g;
        break;
      case Op::MatMul:
        if (wants(n.a)) grad_of(n.a).noalias() += g * nodes_[n.b].value.transpose();
        if (wants(n.b)) grad_of(n.b).noalias() += nodes_[n.a].value.transpose() * g;
        break;
      case Op::Add:
        if (wants(n.a)) grad_of(n.a) += g;
        if (wants(n.b)) grad_of(n.b) += g;
        break;
      case Op::AddCol:
        if (wants(n.a)) grad_of(n.a) += g;
        if (wants(n.b)) grad_of(n.b) += g.rowwise().sum();
        break;
      case Op::AddScalarVar:
        if (wants(n.a)) grad_of(n.a) += g;
        if (wants(n.b)) grad_of(n.b)(0, 0) += g.sum();
        break;
      case Op::Sub:
        if (wants(n.a)) grad_of(n.a) += g;
        if (wants(n.b)) grad_of(n.b) -= g;
        break;
      case Op::Mul:
        if (wants(n.a)) grad_of(n.a) += g.cwiseProduct(nodes_[n.b].value);
        if (wants(n.b)) grad_of(n.b) += g.cwiseProduct(nodes_[n.a].value);
        break;
      case Op::MulRow: {
        const Matrix& A = nodes_[n.a].value;
        const Matrix& B = nodes_[n.b].value;
        if (wants(n.a)) grad_of(n.a).array() += g.array().rowwise() * B.row(0).array();
        if (wants(n.b)) grad_of(n.b) += g.cwiseProduct(A).colwise().sum();
        break;
      }
      case Op::Scale:
        grad_of(n.a) += n.c * g;
        break;
      case Op::AddScalar:
        grad_of(n.a) += g;
        break;
      case Op::Tanh:
        grad_of(n.a).array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::Sigmoid:
        grad_of(n.a).array() += g.array() * n.value.array() * (1.0 - n.value.array());
        break;
      case Op::Relu:
        grad_of(n.a).array() += g.array() * (n.value.array() > 0.0).cast<double>();
        break;
      case Op::Exp:
        grad_of(n.a).array() += g.array() * n.value.array();
        break;
      case Op::Softplus:
        grad_of(n.a).array() += g.array() * nodes_[n.a].value.unaryExpr(&sigmoid_scalar).array();
        break;
      case Op::Square:
        grad_of(n.a).array() += 2.0 * g.array() * nodes_[n.a].value.array();
        break;
      case Op::Min: {
        // Ties route the gradient to the first argument.
        const auto pick_a =
            (nodes_[n.a].value.array() <= nodes_[n.b].value.array()).cast<double>();
        if (wants(n.a)) grad_of(n.a).array() += g.array() * pick_a;
        if (wants(n.b)) grad_of(n.b).array() += g.array() * (1.0 - pick_a);
        break;
      }
      case Op::Concat: {
        Eigen::Index r = 0;
        for (std::size_t k : n.parts) {
          const Eigen::Index rows = nodes_[k].value.rows();
          if (wants(k)) grad_of(k) += g.middleRows(r, rows);
          r += rows;
        }
        break;
      }
      case Op::Slice:
        grad_of(n.a).middleRows(n.offset, n.value.rows()) += g;
        break;
      case Op::Sum:
        grad_of(n.a).array() += g(0, 0);
        break;
      case Op::SumRows:
        grad_of(n.a).rowwise() += g.row(0);
        break;
      case Op::Mean:
        grad_of(n.a).array() += g(0, 0) * n.c;
        break;
    }
  }
}

}  // namespace endonav::approx
