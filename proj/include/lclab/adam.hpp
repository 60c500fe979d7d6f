#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lclab/autodiff.hpp"
#include "lclab/tensor.hpp"

namespace lclab {

struct NamedParam {
  std::string name;
  Var var;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-06;
  double weight_decay = 1e-02;
};

/// Adam with bias correction and decoupled weight decay: the decay shrinks
/// the parameter before the moment-based update, so with decay 0 the update
/// is the textbook recurrence exactly.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t step_count() const { return t_; }

  /// One optimisation step over the given blocks. Consumes and zeroes the
  /// gradients. A non-finite gradient aborts before touching any parameter.
  void step(const std::vector<NamedParam>& params) {
    for (const auto& p : params)
      if (!p.var.grad().all_finite())
        throw std::runtime_error("Adam: non-finite gradient in block '" + p.name + "'");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (const auto& p : params) {
      Slot& s = slot(p);
      Tensor& w = p.var.mutable_value();
      const Tensor& g = p.var.grad();
      for (std::size_t i = 0; i < w.numel(); ++i) {
        if (cfg_.weight_decay != 0.0) w[i] -= cfg_.lr * cfg_.weight_decay * w[i];
        s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g[i];
        s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
      p.var.zero_grad();
    }
  }

 private:
  struct Slot {
    Tensor m, v;
  };

  Slot& slot(const NamedParam& p) {
    auto it = slots_.find(p.name);
    if (it == slots_.end()) {
      Slot s{zeros_like(p.var.value()), zeros_like(p.var.value())};
      it = slots_.emplace(p.name, std::move(s)).first;
    }
    if (!it->second.m.same_shape(p.var.value()))
      throw std::invalid_argument("Adam: shape of block '" + p.name + "' changed");
    return it->second;
  }

  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::unordered_map<std::string, Slot> slots_;
};

}  // namespace lclab
