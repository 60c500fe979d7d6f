#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lclab/tensor.hpp"

namespace lclab {

/// C x C counts; rows index the true class, columns the predicted class.
struct ConfusionMatrix {
  std::size_t num_classes = 0;
  std::vector<std::int64_t> counts;  // row-major

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t c) : num_classes(c), counts(c * c, 0) {}

  std::int64_t& at(std::size_t true_class, std::size_t predicted) {
    return counts[true_class * num_classes + predicted];
  }
  std::int64_t at(std::size_t true_class, std::size_t predicted) const {
    return counts[true_class * num_classes + predicted];
  }

  std::int64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }

  std::int64_t row_sum(std::size_t r) const {
    std::int64_t s = 0;
    for (std::size_t c = 0; c < num_classes; ++c) s += at(r, c);
    return s;
  }

  std::int64_t col_sum(std::size_t c) const {
    std::int64_t s = 0;
    for (std::size_t r = 0; r < num_classes; ++r) s += at(r, c);
    return s;
  }
};

inline ConfusionMatrix confusion_from_predictions(const std::vector<int>& truths,
                                                  const std::vector<int>& predictions,
                                                  std::size_t num_classes) {
  if (truths.size() != predictions.size())
    throw std::invalid_argument("confusion_from_predictions: size mismatch");
  ConfusionMatrix m(num_classes);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] < 0 || static_cast<std::size_t>(truths[i]) >= num_classes ||
        predictions[i] < 0 || static_cast<std::size_t>(predictions[i]) >= num_classes)
      throw std::invalid_argument("confusion_from_predictions: class id out of range");
    ++m.at(static_cast<std::size_t>(truths[i]), static_cast<std::size_t>(predictions[i]));
  }
  return m;
}

inline double accuracy(const ConfusionMatrix& m) {
  const std::int64_t n = m.total();
  if (n == 0) throw std::invalid_argument("accuracy: empty confusion matrix");
  std::int64_t diag = 0;
  for (std::size_t c = 0; c < m.num_classes; ++c) diag += m.at(c, c);
  return static_cast<double>(diag) / static_cast<double>(n);
}

/// weighted F1 = 2 * sum_c (n_c / N) * precision_c * recall_c /
/// (precision_c + recall_c); classes with no precision and no recall
/// contribute zero.
inline double weighted_f1(const ConfusionMatrix& m) {
  const std::int64_t n = m.total();
  if (n == 0) throw std::invalid_argument("weighted_f1: empty confusion matrix");
  double score = 0.0;
  for (std::size_t c = 0; c < m.num_classes; ++c) {
    const std::int64_t tp = m.at(c, c);
    const std::int64_t truths = m.row_sum(c);
    const std::int64_t preds = m.col_sum(c);
    if (truths == 0) continue;  // n_c = 0
    const double precision = preds == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(preds);
    const double recall = static_cast<double>(tp) / static_cast<double>(truths);
    if (precision + recall == 0.0) continue;
    const double weight = static_cast<double>(truths) / static_cast<double>(n);
    score += 2.0 * weight * (precision * recall) / (precision + recall);
  }
  return score;
}

/// Mean over rows of the base-2 entropy of the renormalised k largest
/// scores. Ties at the k-th score keep the lower class index.
inline double topk_entropy(const Tensor& scores, std::size_t k) {
  if (scores.ndim() != 2) throw std::invalid_argument("topk_entropy: expected a matrix");
  const std::size_t n = scores.dim(0), c = scores.dim(1);
  if (k < 1 || k > c) throw std::invalid_argument("topk_entropy: k out of range");
  if (n == 0) throw std::invalid_argument("topk_entropy: no rows");
  double total = 0.0;
  std::vector<std::size_t> order(c);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores.at2(i, a) > scores.at2(i, b);
    });
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += scores.at2(i, order[j]);
    if (s <= 0.0) throw std::invalid_argument("topk_entropy: top-k mass is zero");
    double h = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double p = scores.at2(i, order[j]) / s;
      if (p > 0.0) h -= p * std::log2(p);
    }
    total += h;
  }
  return total / static_cast<double>(n);
}

inline std::vector<std::pair<std::size_t, double>> entropy_curve(const Tensor& scores,
                                                                 std::size_t k_max) {
  std::vector<std::pair<std::size_t, double>> curve;
  for (std::size_t k = 1; k <= k_max; ++k) curve.emplace_back(k, topk_entropy(scores, k));
  return curve;
}

// ---------------------------------------------------------------------------
// Welch's t-test. The p-value comes from the regularized incomplete beta
// function evaluated by Lentz's continued fraction.
// ---------------------------------------------------------------------------

namespace detail {

inline double beta_cont_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cont_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_cont_fraction(b, a, 1.0 - x) / b;
}

struct TTestResult {
  double t = 0.0;
  double p = 1.0;  // two-sided
  double dof = 0.0;
};

inline TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("welch_t_test: each sample needs at least 2 values");
  auto mean_var = [](std::span<const double> s) {
    const double n = static_cast<double>(s.size());
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    var /= (n - 1.0);
    return std::pair<double, double>(mean, var);
  };
  const auto [ma, va] = mean_var(a);
  const auto [mb, vb] = mean_var(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  if (sa + sb == 0.0)
    throw std::invalid_argument("welch_t_test: both samples have zero variance");
  TTestResult r;
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.dof = (sa + sb) * (sa + sb) /
          ((va == 0.0 ? 0.0 : sa * sa / (na - 1.0)) + (vb == 0.0 ? 0.0 : sb * sb / (nb - 1.0)));
  // two-sided p from the t distribution with Welch-Satterthwaite dof
  const double x = r.dof / (r.dof + r.t * r.t);
  r.p = incomplete_beta(r.dof / 2.0, 0.5, x);
  return r;
}

struct SampleStats {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1)
};

inline SampleStats sample_stats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("sample_stats: empty sample");
  SampleStats s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double acc = 0.0;
    for (double v : values) acc += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(acc / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace lclab
