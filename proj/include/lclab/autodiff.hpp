#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iostream>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lclab/random.hpp"
#include "lclab/tensor.hpp"

namespace lclab {

struct Node {
  Tensor value;
  Tensor grad;  // same shape as value, zero-initialised
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;  // empty for leaves

  bool propagates() const { return requires_grad || !inputs.empty(); }
};

/// Handle to a node in the computation graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  /// Trainable leaf; gradients accumulate into it across backward calls
  /// until zero_grad().
  static Var parameter(Tensor value) {
    auto n = std::make_shared<Node>();
    n->grad = zeros_like(value);
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
  }

  /// Non-trainable leaf (masks, weighting matrices, detached values).
  static Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->grad = zeros_like(value);
    n->value = std::move(value);
    return Var(std::move(n));
  }

  // Var is a handle; mutating the underlying node through a const handle is
  // fine, like through a shared_ptr.
  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() const { node_->grad.fill(0.0); }

  double scalar() const {
    if (node_->value.numel() != 1)
      throw std::invalid_argument("Var::scalar on tensor of size " +
                                  std::to_string(node_->value.numel()));
    return node_->value[0];
  }

  const std::vector<std::size_t>& shape() const { return node_->value.shape(); }
  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Wengert list. Primitives append nodes in application order, which is a
/// topological order of the graph by construction, so the backward pass is a
/// single reverse sweep. One tape per forward pass; single-threaded.
class Tape {
 public:
  Var record(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
    if (cleared_)
      throw std::logic_error("Tape: recording on a cleared tape");
    auto n = std::make_shared<Node>();
    n->grad = zeros_like(value);
    n->value = std::move(value);
    n->inputs.reserve(inputs.size());
    for (auto& in : inputs) n->inputs.push_back(in.node());
    n->backward = std::move(backward);
    nodes_.push_back(n);
    return Var(std::move(n));
  }

  /// Reverse sweep from a scalar loss. Gradients of trainable leaves
  /// accumulate additively; the tape is cleared afterwards and cannot be
  /// replayed.
  void backward(const Var& loss) {
    if (cleared_)
      throw std::logic_error("Tape::backward called on a cleared tape");
    if (!loss.defined() || loss.value().numel() != 1)
      throw std::invalid_argument("Tape::backward: loss must be a scalar");
    const Node* target = loss.node().get();
    bool on_tape = false;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->get() == target) {
        on_tape = true;
        break;
      }
    }
    if (!on_tape)
      throw std::invalid_argument("Tape::backward: loss was not produced on this tape");

    loss.node()->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node& n = **it;
      if (n.backward) n.backward(n);
    }
    clear();
  }

  std::size_t size() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    cleared_ = true;
  }

 private:
  std::vector<std::shared_ptr<Node>> nodes_;
  bool cleared_ = false;
};

namespace detail {

inline void check_matrix(const Var& v, const char* op) {
  if (v.shape().size() != 2)
    throw std::invalid_argument(std::string(op) + ": expected a matrix, got " +
                                shape_str(v.value()));
}

inline void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] += src[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives. Each computes its value eagerly, verifies finiteness, and
// registers the analytic backward rule on the tape.
// ---------------------------------------------------------------------------

/// C = A * B for (n x m) * (m x p).
inline Var matmul(Tape& t, const Var& a, const Var& b) {
  detail::check_matrix(a, "matmul");
  detail::check_matrix(b, "matmul");
  const std::size_t n = a.shape()[0], m = a.shape()[1], p = b.shape()[1];
  if (b.shape()[0] != m)
    throw std::invalid_argument("matmul: inner dimensions disagree " + shape_str(a.value()) +
                                " vs " + shape_str(b.value()));
  Tensor out({n, p});
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < m; ++k) {
      const double aik = A.at2(i, k);
      for (std::size_t j = 0; j < p; ++j) out.at2(i, j) += aik * B.at2(k, j);
    }
  ensure_finite(out, "matmul");
  return t.record(std::move(out), {a, b}, [n, m, p](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const Tensor& G = self.grad;
    if (na.propagates()) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) {
          const double g = G.at2(i, j);
          for (std::size_t k = 0; k < m; ++k) na.grad.at2(i, k) += g * nb.value.at2(k, j);
        }
    }
    if (nb.propagates()) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < m; ++k) {
          const double av = na.value.at2(i, k);
          for (std::size_t j = 0; j < p; ++j) nb.grad.at2(k, j) += av * G.at2(i, j);
        }
    }
  });
}

/// C = A * B^T for (n x m) * (p x m). Used for the pairwise similarity
/// matrix H H^T, where both operands are the same Var and both gradient
/// contributions accumulate.
inline Var matmul_nt(Tape& t, const Var& a, const Var& b) {
  detail::check_matrix(a, "matmul_nt");
  detail::check_matrix(b, "matmul_nt");
  const std::size_t n = a.shape()[0], m = a.shape()[1], p = b.shape()[0];
  if (b.shape()[1] != m)
    throw std::invalid_argument("matmul_nt: inner dimensions disagree " + shape_str(a.value()) +
                                " vs " + shape_str(b.value()));
  Tensor out({n, p});
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) acc += A.at2(i, k) * B.at2(j, k);
      out.at2(i, j) = acc;
    }
  ensure_finite(out, "matmul_nt");
  return t.record(std::move(out), {a, b}, [n, m, p](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const Tensor& G = self.grad;
    if (na.propagates()) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) {
          const double g = G.at2(i, j);
          for (std::size_t k = 0; k < m; ++k) na.grad.at2(i, k) += g * nb.value.at2(j, k);
        }
    }
    if (nb.propagates()) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) {
          const double g = G.at2(i, j);
          for (std::size_t k = 0; k < m; ++k) nb.grad.at2(j, k) += g * na.value.at2(i, k);
        }
    }
  });
}

inline Var add(Tape& t, const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument("add: shape mismatch " + shape_str(a.value()) + " vs " +
                                shape_str(b.value()));
  Tensor out = a.value();
  detail::add_into(out, b.value());
  ensure_finite(out, "add");
  return t.record(std::move(out), {a, b}, [](Node& self) {
    if (self.inputs[0]->propagates()) detail::add_into(self.inputs[0]->grad, self.grad);
    if (self.inputs[1]->propagates()) detail::add_into(self.inputs[1]->grad, self.grad);
  });
}

/// Matrix plus a row vector broadcast over rows (bias add).
inline Var add_rowvec(Tape& t, const Var& m, const Var& v) {
  detail::check_matrix(m, "add_rowvec");
  if (v.shape().size() != 1 || v.shape()[0] != m.shape()[1])
    throw std::invalid_argument("add_rowvec: vector shape " + shape_str(v.value()) +
                                " does not match matrix " + shape_str(m.value()));
  const std::size_t n = m.shape()[0], d = m.shape()[1];
  Tensor out = m.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.at2(i, j) += v.value()[j];
  ensure_finite(out, "add_rowvec");
  return t.record(std::move(out), {m, v}, [n, d](Node& self) {
    if (self.inputs[0]->propagates()) detail::add_into(self.inputs[0]->grad, self.grad);
    if (self.inputs[1]->propagates()) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) self.inputs[1]->grad[j] += self.grad.at2(i, j);
    }
  });
}

inline Var scalar_mul(Tape& t, const Var& a, double c) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
  ensure_finite(out, "scalar_mul");
  return t.record(std::move(out), {a}, [c](Node& self) {
    if (!self.inputs[0]->propagates()) return;
    for (std::size_t i = 0; i < self.grad.numel(); ++i)
      self.inputs[0]->grad[i] += c * self.grad[i];
  });
}

inline Var sub(Tape& t, const Var& a, const Var& b) { return add(t, a, scalar_mul(t, b, -1.0)); }

inline Var relu(Tape& t, const Var& a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  return t.record(std::move(out), {a}, [](Node& self) {
    if (!self.inputs[0]->propagates()) return;
    for (std::size_t i = 0; i < self.grad.numel(); ++i)
      if (self.inputs[0]->value[i] > 0.0) self.inputs[0]->grad[i] += self.grad[i];
  });
}

inline Var elem_mul(Tape& t, const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument("elem_mul: shape mismatch " + shape_str(a.value()) + " vs " +
                                shape_str(b.value()));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  ensure_finite(out, "elem_mul");
  return t.record(std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    if (na.propagates())
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        na.grad[i] += self.grad[i] * nb.value[i];
    if (nb.propagates())
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        nb.grad[i] += self.grad[i] * na.value[i];
  });
}

inline Var exp(Tape& t, const Var& a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
  ensure_finite(out, "exp");
  return t.record(std::move(out), {a}, [](Node& self) {
    if (!self.inputs[0]->propagates()) return;
    for (std::size_t i = 0; i < self.grad.numel(); ++i)
      self.inputs[0]->grad[i] += self.grad[i] * self.value[i];
  });
}

inline Var log(Tape& t, const Var& a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::log(out[i]);
  ensure_finite(out, "log");
  return t.record(std::move(out), {a}, [](Node& self) {
    if (!self.inputs[0]->propagates()) return;
    for (std::size_t i = 0; i < self.grad.numel(); ++i)
      self.inputs[0]->grad[i] += self.grad[i] / self.inputs[0]->value[i];
  });
}

inline Var sum_all(Tape& t, const Var& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.value().numel(); ++i) acc += a.value()[i];
  Tensor out = Tensor::scalar(acc);
  ensure_finite(out, "sum_all");
  return t.record(std::move(out), {a}, [](Node& self) {
    if (!self.inputs[0]->propagates()) return;
    const double g = self.grad[0];
    for (std::size_t i = 0; i < self.inputs[0]->grad.numel(); ++i)
      self.inputs[0]->grad[i] += g;
  });
}

/// Sum of a matrix over one axis: axis 0 collapses rows (result length =
/// columns), axis 1 collapses columns (result length = rows).
inline Var sum_axis(Tape& t, const Var& a, std::size_t axis) {
  detail::check_matrix(a, "sum_axis");
  if (axis > 1) throw std::invalid_argument("sum_axis: axis out of range");
  const std::size_t n = a.shape()[0], d = a.shape()[1];
  const std::size_t out_len = axis == 0 ? d : n;
  Tensor out({out_len});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[axis == 0 ? j : i] += a.value().at2(i, j);
  ensure_finite(out, "sum_axis");
  return t.record(std::move(out), {a}, [n, d, axis](Node& self) {
    if (!self.inputs[0]->propagates()) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j)
        self.inputs[0]->grad.at2(i, j) += self.grad[axis == 0 ? j : i];
  });
}

inline Var mean_axis(Tape& t, const Var& a, std::size_t axis) {
  detail::check_matrix(a, "mean_axis");
  const std::size_t len = axis == 0 ? a.shape()[0] : a.shape()[1];
  if (len == 0) throw std::invalid_argument("mean_axis: empty axis");
  return scalar_mul(t, sum_axis(t, a, axis), 1.0 / static_cast<double>(len));
}

/// Row-wise softmax of a matrix, stabilised by the row maximum.
inline Var softmax(Tape& t, const Var& a) {
  detail::check_matrix(a, "softmax");
  const std::size_t n = a.shape()[0], d = a.shape()[1];
  if (d == 0) throw std::invalid_argument("softmax: empty axis");
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    double m = a.value().at2(i, 0);
    for (std::size_t j = 1; j < d; ++j) m = std::max(m, a.value().at2(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double e = std::exp(a.value().at2(i, j) - m);
      out.at2(i, j) = e;
      s += e;
    }
    for (std::size_t j = 0; j < d; ++j) out.at2(i, j) /= s;
  }
  ensure_finite(out, "softmax");
  return t.record(std::move(out), {a}, [n, d](Node& self) {
    if (!self.inputs[0]->propagates()) return;
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += self.grad.at2(i, j) * self.value.at2(i, j);
      for (std::size_t j = 0; j < d; ++j)
        self.inputs[0]->grad.at2(i, j) += self.value.at2(i, j) * (self.grad.at2(i, j) - dot);
    }
  });
}

/// Row-wise L2 normalisation. An all-zero row maps to the zero row (with a
/// warning on stderr) instead of dividing by zero.
inline Var l2_normalize(Tape& t, const Var& a) {
  detail::check_matrix(a, "l2_normalize");
  const std::size_t n = a.shape()[0], d = a.shape()[1];
  Tensor out({n, d});
  std::vector<double> norms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += a.value().at2(i, j) * a.value().at2(i, j);
    const double nrm = std::sqrt(s);
    norms[i] = nrm;
    if (nrm < 1e-150) {
      std::cerr << "lclab: l2_normalize: zero-norm row " << i << " left as zeros\n";
      continue;
    }
    for (std::size_t j = 0; j < d; ++j) out.at2(i, j) = a.value().at2(i, j) / nrm;
  }
  ensure_finite(out, "l2_normalize");
  return t.record(std::move(out), {a}, [n, d, norms](Node& self) {
    if (!self.inputs[0]->propagates()) return;
    for (std::size_t i = 0; i < n; ++i) {
      if (norms[i] < 1e-150) continue;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += self.grad.at2(i, j) * self.value.at2(i, j);
      for (std::size_t j = 0; j < d; ++j)
        self.inputs[0]->grad.at2(i, j) +=
            (self.grad.at2(i, j) - self.value.at2(i, j) * dot) / norms[i];
    }
  });
}

/// Inverted dropout: at train time each element survives with probability
/// 1-p and is scaled by 1/(1-p). Use p = 0 (or skip the call) for eval.
inline Var dropout(Tape& t, const Var& a, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
  Tensor mask(a.value().shape());
  const double scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < mask.numel(); ++i)
    mask[i] = rng.uniform() >= p ? scale : 0.0;
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= mask[i];
  return t.record(std::move(out), {a}, [mask](Node& self) {
    if (!self.inputs[0]->propagates()) return;
    for (std::size_t i = 0; i < self.grad.numel(); ++i)
      self.inputs[0]->grad[i] += self.grad[i] * mask[i];
  });
}

/// Select rows of a matrix by index (embedding lookup). Gradient scatters
/// back additively, so repeated indices accumulate.
inline Var gather_rows(Tape& t, const Var& m, std::vector<std::size_t> ids) {
  detail::check_matrix(m, "gather_rows");
  const std::size_t rows = m.shape()[0], d = m.shape()[1];
  for (std::size_t id : ids)
    if (id >= rows) throw std::invalid_argument("gather_rows: row index out of range");
  Tensor out({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r)
    for (std::size_t j = 0; j < d; ++j) out.at2(r, j) = m.value().at2(ids[r], j);
  return t.record(std::move(out), {m}, [ids, d](Node& self) {
    if (!self.inputs[0]->propagates()) return;
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (std::size_t j = 0; j < d; ++j)
        self.inputs[0]->grad.at2(ids[r], j) += self.grad.at2(r, j);
  });
}

// ---------------------------------------------------------------------------
// Plain-tensor helpers (no tape involvement).
// ---------------------------------------------------------------------------

inline Tensor softmax_values(const Tensor& x) {
  if (x.ndim() != 2) throw std::invalid_argument("softmax_values: expected a matrix");
  const std::size_t n = x.dim(0), d = x.dim(1);
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    double m = x.at2(i, 0);
    for (std::size_t j = 1; j < d; ++j) m = std::max(m, x.at2(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double e = std::exp(x.at2(i, j) - m);
      out.at2(i, j) = e;
      s += e;
    }
    for (std::size_t j = 0; j < d; ++j) out.at2(i, j) /= s;
  }
  return out;
}

}  // namespace lclab
