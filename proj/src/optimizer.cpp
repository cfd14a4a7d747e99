#include "orsp/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace orsp {

TrainConfig TrainConfig::resolved(int n_trials) const {
  TrainConfig out = *this;
  const long micro = (n_trials + batch_size - 1) / std::max(batch_size, 1);
  const long accum = std::max(grad_accum, 1);
  if (out.total_steps < 0)
    out.total_steps = (micro * epochs + accum - 1) / accum;
  if (out.warmup_steps < 0)
    out.warmup_steps = std::lround(warmup_frac * out.total_steps);
  if (out.total_steps > 0 && out.warmup_steps >= out.total_steps)
    out.warmup_steps = out.total_steps - 1;
  return out;
}

double lr_at(long step, const TrainConfig& cfg) {
  if (cfg.total_steps < 0 || cfg.warmup_steps < 0)
    throw std::logic_error("lr_at: schedule not resolved");
  if (step >= cfg.total_steps) return cfg.lr_min;
  if (step < cfg.warmup_steps) {
    const double frac = static_cast<double>(step) / cfg.warmup_steps;
    return 0.1 * cfg.lr0 + 0.9 * cfg.lr0 * frac;
  }
  const double span = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  const double t = static_cast<double>(step - cfg.warmup_steps) / span;
  return cfg.lr_min +
         0.5 * (cfg.lr0 - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

void AdamW::step(ParamStore& store, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const std::string& name : store.names()) {
    Matrix& p = store.value(name);
    const Matrix& g = store.grad(name);
    Matrix& m = store.opt_m(name);
    Matrix& v = store.opt_v(name);
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    const Matrix m_hat = m / bc1;
    const Matrix v_hat = v / bc2;
    p.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + eps_);
    if (weight_decay_ != 0.0) p *= 1.0 - lr * weight_decay_;
  }
}

}  // namespace orsp
