#pragma once

// Adam with the inverse-sqrt warmup schedule. Optimizer state is keyed by
// parameter name so the parameter set may grow lazily during the first
// forward pass. Frozen name prefixes are skipped entirely.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "spotlight/model/params.hpp"

namespace spotlight::train {

struct OptimizerConfig {
  double peak_lr = 1e-3;
  int warmup_steps = 200;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables clipping
};

// lr(t) = peak * min(t / warmup, sqrt(warmup / t)), t counted from 1.
inline double schedule_lr(const OptimizerConfig& cfg, int step) {
  if (step < 1) throw num::NumericError("schedule_lr: step must be >= 1");
  const double w = static_cast<double>(cfg.warmup_steps);
  const double t = static_cast<double>(step);
  return cfg.peak_lr * std::min(t / w, std::sqrt(w / t));
}

template <typename S>
class Adam {
 public:
  explicit Adam(OptimizerConfig cfg) : cfg_(cfg) {}

  void freeze_prefix(const std::string& prefix) { frozen_.push_back(prefix); }

  // Applies one update using the gradients currently accumulated in the
  // store, scaled by `grad_scale` (1/batch for summed per-example grads).
  void step(model::ParamStore<S>& ps, double grad_scale = 1.0) {
    ++t_;
    const double lr = schedule_lr(cfg_, t_);

    double sq_norm = 0.0;
    for (auto& p : ps.named()) {
      if (is_frozen(p.name)) continue;
      for (S g : *p.tensor.grad) {
        const double gg = static_cast<double>(g) * grad_scale;
        sq_norm += gg * gg;
      }
    }
    double clip_scale = 1.0;
    if (cfg_.grad_clip > 0.0) {
      const double norm = std::sqrt(sq_norm);
      if (norm > cfg_.grad_clip) clip_scale = cfg_.grad_clip / norm;
    }

    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (auto& p : ps.named()) {
      if (is_frozen(p.name)) continue;
      State& st = state_[p.name];
      if (st.m.empty()) {
        st.m.assign(p.tensor.numel(), 0.0);
        st.v.assign(p.tensor.numel(), 0.0);
      }
      S* w = ps.get(p.name).mut_ptr();
      const S* g = p.tensor.grad->data();
      for (std::size_t i = 0; i < p.tensor.numel(); ++i) {
        const double gi = static_cast<double>(g[i]) * grad_scale * clip_scale;
        st.m[i] = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * gi;
        st.v[i] = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        w[i] -= static_cast<S>(lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

  int steps_taken() const { return t_; }
  double current_lr() const { return t_ == 0 ? 0.0 : schedule_lr(cfg_, t_); }

 private:
  bool is_frozen(const std::string& name) const {
    for (const auto& pre : frozen_) {
      if (name.rfind(pre, 0) == 0) return true;
    }
    return false;
  }

  struct State {
    std::vector<double> m, v;
  };
  OptimizerConfig cfg_;
  int t_ = 0;
  std::map<std::string, State> state_;
  std::vector<std::string> frozen_;
};

}  // namespace spotlight::train
