#pragma once

#include <functional>

#include "orsp/losses.hpp"
#include "orsp/optimizer.hpp"

namespace orsp {

struct StepLog {
  int epoch = 0;
  long step = 0;  // micro-step index across the whole run
  LossBreakdown loss;
  double lr = 0.0;
};

struct TrainResult {
  ParamStore params;
  std::vector<StepLog> steps;
  std::vector<LossBreakdown> epoch_val;  // one entry per epoch if val given
  TrainConfig schedule;                  // resolved step counts
  long optimizer_steps = 0;
  long adam_t = 0;
  Rng::State rng_state{};
};

/// Called after each epoch; return true to stop early.
using EpochCallback =
    std::function<bool(int epoch, const ParamStore& params,
                       const std::vector<LossBreakdown>& epoch_val)>;

/// Teacher-forced training over seeded-shuffled trials. Parameters are
/// initialized from the config seed, so the whole run is a pure function
/// of (dataset, configs). Gradients accumulate over grad_accum
/// micro-batches, are averaged, then applied by AdamW under the
/// warmup+cosine schedule. Throws on a non-finite loss, naming the term.
TrainResult train(const std::vector<Trial>& train_set,
                  const std::vector<Trial>* val_set, const ModelConfig& mcfg,
                  const TrainConfig& tcfg, const EpochCallback& on_epoch = {});

/// Value-only teacher-forced losses for one trial.
LossBreakdown eval_losses_on(const Trial& trial, const ParamStore& params,
                             const ModelConfig& cfg);

/// Mean teacher-forced losses over a set, reduced in index order.
LossBreakdown mean_losses(const std::vector<Trial>& trials,
                          const ParamStore& params, const ModelConfig& cfg,
                          int threads = 1);

/// Fraction of slots whose thresholded validity matches the ground-truth
/// occupancy, over every slot of every pack (teacher-forced forward).
double validity_accuracy(const std::vector<Trial>& trials,
                         const ParamStore& params, const ModelConfig& cfg,
                         int threads = 1);

}  // namespace orsp
