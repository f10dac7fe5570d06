#pragma once

// Minimal reverse-mode differentiation over dense matrices.
//
// Every operation appends a node holding its value and a closure that pushes
// the node's adjoint back into its inputs. Nodes are created in topological
// order, so a single reverse sweep computes all gradients.

#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace herdcast::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix&)>;

  Var leaf(Matrix value) { return record(std::move(value), nullptr); }

  Var record(Matrix value, Backward backward) {
    nodes_.push_back({std::move(value), Matrix(), std::move(backward)});
    return Var(this, nodes_.size() - 1);
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }

  void accumulate(std::size_t id, const Matrix& g) { nodes_[id].grad += g; }
  Matrix& grad_ref(std::size_t id) { return nodes_[id].grad; }

  // Seeds d(output)/d(output) = 1; output must be 1x1.
  void backward(const Var& output) {
    if (output.rows() != 1 || output.cols() != 1)
      throw std::invalid_argument("backward requires a scalar output");
    for (auto& n : nodes_) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    nodes_[output.id()].grad(0, 0) = 1.0;
    for (std::size_t i = output.id() + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.backward) n.backward(*this, n.grad);
    }
    differentiated_ = true;
  }

  const Matrix& gradient(const Var& v) const {
    if (!differentiated_) throw std::logic_error("gradient requested before backward");
    return nodes_[v.id()].grad;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
  };
  std::vector<Node> nodes_;
  bool differentiated_ = false;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

namespace detail {
inline Tape& same_tape(const Var& a, const Var& b) {
  assert(a.tape() == b.tape());
  (void)b;
  return *a.tape();
}
}  // namespace detail

inline Var constant(Tape& t, Matrix value) { return t.leaf(std::move(value)); }

inline Var add(const Var& a, const Var& b) {
  auto& t = detail::same_tape(a, b);
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() + b.value(), [ia, ib](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g);
    tp.accumulate(ib, g);
  });
}

inline Var sub(const Var& a, const Var& b) {
  auto& t = detail::same_tape(a, b);
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() - b.value(), [ia, ib](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g);
    tp.grad_ref(ib) -= g;
  });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }

inline Var hadamard(const Var& a, const Var& b) {
  auto& t = detail::same_tape(a, b);
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value().cwiseProduct(b.value()), [ia, ib](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
    tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
  });
}

inline Var scale(const Var& a, double s) {
  const auto ia = a.id();
  return a.tape()->record(a.value() * s, [ia, s](Tape& tp, const Matrix& g) { tp.accumulate(ia, g * s); });
}

inline Var add_scalar(const Var& a, double s) {
  const auto ia = a.id();
  return a.tape()->record(a.value().array() + s, [ia](Tape& tp, const Matrix& g) { tp.accumulate(ia, g); });
}

inline Var matmul(const Var& a, const Var& b) {
  auto& t = detail::same_tape(a, b);
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value(), [ia, ib](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g * tp.value(ib).transpose());
    tp.accumulate(ib, tp.value(ia).transpose() * g);
  });
}

// c * b with constant c (e.g. the normalized adjacency).
inline Var matmul(const Matrix& c, const Var& b) {
  const auto ib = b.id();
  return b.tape()->record(c * b.value(), [ib, c](Tape& tp, const Matrix& g) {
    tp.accumulate(ib, c.transpose() * g);
  });
}

// a * b^T; used for dense layers with out x in weights.
inline Var matmul_nt(const Var& a, const Var& b) {
  auto& t = detail::same_tape(a, b);
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value().transpose(), [ia, ib](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g * tp.value(ib));
    tp.accumulate(ib, g.transpose() * tp.value(ia));
  });
}

// Adds a 1 x n row to every row of a.
inline Var add_row(const Var& a, const Var& row) {
  auto& t = detail::same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
  const auto ia = a.id(), ir = row.id();
  Matrix v = a.value().rowwise() + row.value().row(0);
  return t.record(std::move(v), [ia, ir](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g);
    tp.accumulate(ir, g.colwise().sum());
  });
}

// Multiplies each row i of a by col(i, 0).
inline Var mul_col(const Var& a, const Var& col) {
  auto& t = detail::same_tape(a, col);
  if (col.cols() != 1 || col.rows() != a.rows()) throw std::invalid_argument("mul_col: shape mismatch");
  const auto ia = a.id(), ic = col.id();
  Matrix v = a.value().array().colwise() * col.value().col(0).array();
  return t.record(std::move(v), [ia, ic](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(ia);
    const Matrix& cv = tp.value(ic);
    tp.accumulate(ia, (g.array().colwise() * cv.col(0).array()).matrix());
    tp.accumulate(ic, g.cwiseProduct(av).rowwise().sum());
  });
}

// Elementwise product with a constant mask.
inline Var mask(const Var& a, const Matrix& m) {
  const auto ia = a.id();
  return a.tape()->record(a.value().cwiseProduct(m), [ia, m](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g.cwiseProduct(m));
  });
}

inline Var relu(const Var& a) {
  const auto ia = a.id();
  return a.tape()->record(a.value().cwiseMax(0.0), [ia](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, (tp.value(ia).array() > 0.0).cast<double>().matrix().cwiseProduct(g));
  });
}

inline Var exp(const Var& a) {
  const auto ia = a.id();
  Matrix v = a.value().array().exp();
  return a.tape()->record(v, [ia, v](Tape& tp, const Matrix& g) { tp.accumulate(ia, g.cwiseProduct(v)); });
}

inline Var square(const Var& a) {
  const auto ia = a.id();
  return a.tape()->record(a.value().array().square(), [ia](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, 2.0 * g.cwiseProduct(tp.value(ia)));
  });
}

inline Var sum(const Var& a) {
  const auto ia = a.id();
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  const auto r = a.rows(), c = a.cols();
  return a.tape()->record(std::move(v), [ia, r, c](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, Matrix::Constant(r, c, g(0, 0)));
  });
}

inline Var mean(const Var& a) {
  const double n = static_cast<double>(a.rows() * a.cols());
  return scale(sum(a), 1.0 / n);
}

inline Var sum_squares(const Var& a) { return sum(square(a)); }

inline Var row_sum(const Var& a) {
  const auto ia = a.id();
  const auto c = a.cols();
  return a.tape()->record(a.value().rowwise().sum(), [ia, c](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g.replicate(1, c));
  });
}

inline Var cols(const Var& a, Eigen::Index start, Eigen::Index n) {
  const auto ia = a.id();
  return a.tape()->record(a.value().middleCols(start, n), [ia, start, n](Tape& tp, const Matrix& g) {
    tp.grad_ref(ia).middleCols(start, n) += g;
  });
}

inline Var rows(const Var& a, Eigen::Index start, Eigen::Index n) {
  const auto ia = a.id();
  return a.tape()->record(a.value().middleRows(start, n), [ia, start, n](Tape& tp, const Matrix& g) {
    tp.grad_ref(ia).middleRows(start, n) += g;
  });
}

inline Var hconcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("hconcat of nothing");
  const auto r = parts.front().rows();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) throw std::invalid_argument("hconcat: row mismatch");
    total += p.cols();
  }
  Matrix v(r, total);
  std::vector<std::pair<std::size_t, Eigen::Index>> spans;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    spans.emplace_back(p.id(), off);
    off += p.cols();
  }
  return parts.front().tape()->record(std::move(v), [spans](Tape& tp, const Matrix& g) {
    for (const auto& [id, start] : spans) tp.grad_ref(id) += g.middleCols(start, tp.value(id).cols());
  });
}

inline Var vconcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("vconcat of nothing");
  const auto c = parts.front().cols();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw std::invalid_argument("vconcat: column mismatch");
    total += p.rows();
  }
  Matrix v(total, c);
  std::vector<std::pair<std::size_t, Eigen::Index>> spans;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    spans.emplace_back(p.id(), off);
    off += p.rows();
  }
  return parts.front().tape()->record(std::move(v), [spans](Tape& tp, const Matrix& g) {
    for (const auto& [id, start] : spans) tp.grad_ref(id) += g.middleRows(start, tp.value(id).rows());
  });
}

// Row-wise softmax with max subtraction.
inline Var softmax_rows(const Var& a) {
  const auto ia = a.id();
  Matrix v = a.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double m = v.row(i).maxCoeff();
    v.row(i) = (v.row(i).array() - m).exp();
    v.row(i) /= v.row(i).sum();
  }
  return a.tape()->record(v, [ia, v](Tape& tp, const Matrix& g) {
    const Eigen::VectorXd dot = g.cwiseProduct(v).rowwise().sum();
    Matrix ga = v.cwiseProduct(g.colwise() - dot);
    tp.accumulate(ia, ga);
  });
}

}  // namespace herdcast::ad
