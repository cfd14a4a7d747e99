#pragma once

#include <cstdint>

#include "orsp/param_store.hpp"

namespace orsp {

struct TrainConfig {
  double lr0 = 3e-4;
  double lr_min = 1e-6;
  double warmup_frac = 0.05;  // fraction of total optimizer steps
  long warmup_steps = -1;     // derived from warmup_frac when < 0
  long total_steps = -1;      // derived from epochs and dataset when < 0
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int grad_accum = 8;
  int batch_size = 1;
  int epochs = 1;
  std::uint64_t seed = 0;

  /// Fills total_steps/warmup_steps for a dataset of n_trials.
  TrainConfig resolved(int n_trials) const;
};

/// Linear warmup from 0.1*lr0 to lr0 over warmup_steps, then cosine decay
/// to lr_min at total_steps; steps past the end clamp to lr_min.
double lr_at(long step, const TrainConfig& cfg);

/// Decoupled-weight-decay adaptive-moment update. Gradients are read from
/// the store (already averaged over the accumulation window); moments live
/// in the store's optimizer slots.
class AdamW {
 public:
  explicit AdamW(const TrainConfig& cfg)
      : beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.eps),
        weight_decay_(cfg.weight_decay) {}

  void step(ParamStore& store, double lr);

  long t() const { return t_; }
  void set_t(long t) { t_ = t; }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  long t_ = 0;
};

}  // namespace orsp
