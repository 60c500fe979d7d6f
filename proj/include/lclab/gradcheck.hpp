#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "lclab/adam.hpp"
#include "lclab/autodiff.hpp"
#include "lclab/random.hpp"

namespace lclab {

struct BlockCheck {
  std::string name;
  std::size_t coords_checked = 0;
  double max_rel_err = 0.0;
};

struct FiniteDiffReport {
  std::vector<BlockCheck> blocks;
  double max_rel_err = 0.0;

  bool passed(double tolerance) const { return max_rel_err < tolerance; }
};

/// Central-difference verification of reverse-mode gradients.
///
/// `build` must construct the scalar loss on the given tape as a
/// deterministic function of the current parameter values (dropout off).
/// Every block is probed on a random subsample of at least `min_coords`
/// coordinates (all of them when the block is smaller).
inline FiniteDiffReport finite_diff_check(const std::function<Var(Tape&)>& build,
                                          const std::vector<NamedParam>& params,
                                          double step = 1e-5, std::uint64_t probe_seed = 0,
                                          std::size_t min_coords = 50) {
  for (const auto& p : params) p.var.zero_grad();
  {
    Tape tape;
    Var loss = build(tape);
    tape.backward(loss);
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.var.grad());

  auto eval = [&]() {
    Tape tape;
    double v = build(tape).scalar();
    if (!std::isfinite(v)) throw std::runtime_error("finite_diff_check: non-finite loss");
    return v;
  };

  Rng rng = make_stream(probe_seed, Stream::misc);
  FiniteDiffReport report;
  for (std::size_t b = 0; b < params.size(); ++b) {
    Tensor& w = params[b].var.mutable_value();
    std::vector<std::size_t> coords;
    if (w.numel() <= min_coords) {
      coords.resize(w.numel());
      for (std::size_t i = 0; i < w.numel(); ++i) coords[i] = i;
    } else {
      std::vector<std::size_t> all(w.numel());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      rng.shuffle(all);
      coords.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(min_coords));
    }
    BlockCheck check{params[b].name, coords.size(), 0.0};
    for (std::size_t c : coords) {
      const double orig = w[c];
      w[c] = orig + step;
      const double up = eval();
      w[c] = orig - step;
      const double down = eval();
      w[c] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[b][c];
      const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      check.max_rel_err = std::max(check.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, check.max_rel_err);
    report.blocks.push_back(std::move(check));
  }
  for (const auto& p : params) p.var.zero_grad();
  return report;
}

}  // namespace lclab
