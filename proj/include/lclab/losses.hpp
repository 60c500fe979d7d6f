#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "lclab/autodiff.hpp"
#include "lclab/tensor.hpp"

namespace lclab {

using Pairing = std::vector<std::size_t>;

/// Floor applied to weighting-network confidences before taking logs, so an
/// exact zero from the softmax cannot produce -inf.
constexpr double kWeightFloor = 1e-8;

struct ContrastiveConfig {
  double temperature = 0.3;
  double alpha = 0.5;
};

inline void validate_pairing(const Pairing& g) {
  const std::size_t n = g.size();
  if (n < 2) throw std::invalid_argument("pairing: need at least 2 rows");
  for (std::size_t i = 0; i < n; ++i) {
    if (g[i] >= n) throw std::invalid_argument("pairing: index out of range");
    if (g[i] == i) throw std::invalid_argument("pairing: fixed point at " + std::to_string(i));
    if (g[g[i]] != i) throw std::invalid_argument("pairing: not an involution");
  }
}

/// P(i) = { j != i : labels[j] == labels[i] }. With a consistent pairing the
/// augmented twin is always included, so no set is empty.
inline std::vector<std::vector<std::size_t>> positive_sets(const std::vector<int>& labels,
                                                           const Pairing& g) {
  validate_pairing(g);
  if (labels.size() != g.size())
    throw std::invalid_argument("positive_sets: labels and pairing disagree in length");
  for (std::size_t i = 0; i < g.size(); ++i)
    if (labels[i] != labels[g[i]])
      throw std::invalid_argument("positive_sets: labels inconsistent with pairing");
  std::vector<std::vector<std::size_t>> sets(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (j != i && labels[j] == labels[i]) sets[i].push_back(j);
  return sets;
}

/// Mean over rows of -log softmax(logits)[label], stabilised by the row max.
/// Registered as a fused primitive; backward is (softmax - onehot) / N.
inline Var cross_entropy(Tape& tape, const Var& logits, const std::vector<int>& labels) {
  if (logits.shape().size() != 2)
    throw std::invalid_argument("cross_entropy: logits must be a matrix");
  const std::size_t n = logits.shape()[0], c = logits.shape()[1];
  if (labels.size() != n)
    throw std::invalid_argument("cross_entropy: one label per logits row required");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw std::invalid_argument("cross_entropy: label " + std::to_string(y) + " out of range");
  const Tensor& x = logits.value();
  Tensor probs({n, c});
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double m = x.at2(i, 0);
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, x.at2(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(x.at2(i, j) - m);
      probs.at2(i, j) = e;
      s += e;
    }
    for (std::size_t j = 0; j < c; ++j) probs.at2(i, j) /= s;
    total += -(x.at2(i, static_cast<std::size_t>(labels[i])) - m - std::log(s));
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(n));
  ensure_finite(out, "cross_entropy");
  return tape.record(std::move(out), {logits}, [probs, labels, n, c](Node& self) {
    if (!self.inputs[0]->propagates()) return;
    const double up = self.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double onehot = static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0;
        self.inputs[0]->grad.at2(i, j) += up * (probs.at2(i, j) - onehot);
      }
  });
}

namespace detail {

/// Row-wise log-sum-exp of Z over the off-diagonal entries, stabilised by
/// each row's off-diagonal maximum. Diagonal entries are shifted to a large
/// negative constant before exp and zeroed by the mask, so they contribute
/// neither value nor gradient.
inline Var offdiag_lse_rows(Tape& tape, const Var& z) {
  const std::size_t n = z.shape()[0];
  if (z.shape()[1] != n) throw std::invalid_argument("offdiag_lse_rows: square matrix required");
  Tensor shift({n, n});
  Tensor mask({n, n});
  Tensor row_max({n});
  for (std::size_t i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) m = std::max(m, z.value().at2(i, k));
    row_max[i] = m;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) {
        shift.at2(i, k) = -z.value().at2(i, k) - 60.0;  // exp(-60) vanishes under the mask
        mask.at2(i, k) = 0.0;
      } else {
        shift.at2(i, k) = -m;
        mask.at2(i, k) = 1.0;
      }
    }
  }
  Var shifted = add(tape, z, Var::constant(std::move(shift)));
  Var masked = elem_mul(tape, exp(tape, shifted), Var::constant(std::move(mask)));
  Var row_sums = sum_axis(tape, masked, 1);
  return add(tape, log(tape, row_sums), Var::constant(std::move(row_max)));
}

/// Shared core of the three contrastive losses:
///   sum_i lse_i(Z) - sum(S o pos_weight) - const_term
/// where S is the temperature-scaled similarity matrix and Z is S plus an
/// optional constant per-entry log-weight matrix.
inline Var contrastive_core(Tape& tape, const Var& h, const Tensor& pos_weight,
                            const Tensor* log_w, double const_term, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("contrastive loss: temperature must be > 0");
  Var sim = scalar_mul(tape, matmul_nt(tape, h, h), 1.0 / tau);
  Var z = log_w ? add(tape, sim, Var::constant(*log_w)) : sim;
  Var lse = offdiag_lse_rows(tape, z);
  Var positives = sum_all(tape, elem_mul(tape, sim, Var::constant(pos_weight)));
  Var loss = sub(tape, sum_all(tape, lse), positives);
  if (const_term != 0.0)
    loss = add(tape, loss, Var::constant(Tensor::scalar(-const_term)));
  return loss;
}

}  // namespace detail

/// Self-supervised contrastive loss: the only positive of row i is its
/// augmented twin g(i); every other row is a negative. Summed over the 2K
/// rows.
inline Var l_self(Tape& tape, const Var& h, const Pairing& g, double tau) {
  if (h.shape().size() != 2 || h.shape()[0] != g.size())
    throw std::invalid_argument("l_self: representation/pairing size mismatch");
  validate_pairing(g);
  const std::size_t n = g.size();
  Tensor pos({n, n});
  for (std::size_t i = 0; i < n; ++i) pos.at2(i, g[i]) = 1.0;
  return detail::contrastive_core(tape, h, pos, nullptr, 0.0, tau);
}

/// Supervised contrastive loss: positives are all same-class rows, each
/// anchor's terms averaged over its positive set; the denominator runs over
/// every other row, positives included.
inline Var l_scl(Tape& tape, const Var& h, const std::vector<int>& labels, const Pairing& g,
                 double tau) {
  if (h.shape().size() != 2 || h.shape()[0] != labels.size())
    throw std::invalid_argument("l_scl: representation/label size mismatch");
  const auto sets = positive_sets(labels, g);
  const std::size_t n = labels.size();
  Tensor pos({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 1.0 / static_cast<double>(sets[i].size());
    for (std::size_t p : sets[i]) pos.at2(i, p) = w;
  }
  return detail::contrastive_core(tape, h, pos, nullptr, 0.0, tau);
}

/// Label-aware contrastive loss. Each comparison between anchor i and row k
/// is scaled by the weighting network's confidence that i belongs to class
/// y_k; the numerator carries w_{i,y_i}. W enters as constants only, so no
/// gradient reaches the weighting network through this loss. Stabilised by
/// the per-anchor maximum of (h_i . h_k / tau + ln w_{i,y_k}).
inline Var l_lcl(Tape& tape, const Var& h, const std::vector<int>& labels, const Pairing& g,
                 const Tensor& w, double tau) {
  if (h.shape().size() != 2 || h.shape()[0] != labels.size())
    throw std::invalid_argument("l_lcl: representation/label size mismatch");
  const std::size_t n = labels.size();
  if (w.ndim() != 2 || w.dim(0) != n)
    throw std::invalid_argument("l_lcl: weight matrix must have one row per sample");
  const std::size_t c = w.dim(1);
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw std::invalid_argument("l_lcl: label out of range of weight columns");
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (w.at2(i, j) < 0.0)
        throw std::invalid_argument("l_lcl: negative weight at row " + std::to_string(i));
      row_sum += w.at2(i, j);
    }
    if (std::abs(row_sum - 1.0) > 1e-6)
      throw std::invalid_argument("l_lcl: weight row " + std::to_string(i) +
                                  " is not on the probability simplex");
  }

  const auto sets = positive_sets(labels, g);
  Tensor pos({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    const double pw = 1.0 / static_cast<double>(sets[i].size());
    for (std::size_t p : sets[i]) pos.at2(i, p) = pw;
  }
  Tensor log_w({n, n});
  double anchor_log_w = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k)
      log_w.at2(i, k) =
          std::log(std::max(w.at2(i, static_cast<std::size_t>(labels[k])), kWeightFloor));
    anchor_log_w += std::log(std::max(w.at2(i, static_cast<std::size_t>(labels[i])), kWeightFloor));
  }
  return detail::contrastive_core(tape, h, pos, &log_w, anchor_log_w, tau);
}

/// L_f = alpha * (L_w + L_e) + (1 - alpha) * L_LCL.
inline Var joint_objective(Tape& tape, const Var& loss_w, const Var& loss_e, const Var& loss_lcl,
                           double alpha) {
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("joint_objective: alpha must be in [0,1]");
  Var ce_part = scalar_mul(tape, add(tape, loss_w, loss_e), alpha);
  Var lcl_part = scalar_mul(tape, loss_lcl, 1.0 - alpha);
  return add(tape, ce_part, lcl_part);
}

}  // namespace lclab
