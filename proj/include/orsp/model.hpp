#pragma once

#include "orsp/context_encoder.hpp"
#include "orsp/hesd.hpp"
#include "orsp/rng.hpp"

namespace orsp {

struct ModelVars {
  ContextParams ctx;
  HesdParams hesd;
};

/// Creates every tensor the configuration uses, in a fixed order so the
/// result is a pure function of (cfg, rng state). Weights are
/// Glorot-uniform, biases zero.
ParamStore init_model_params(const ModelConfig& cfg, Rng& rng);

ModelVars bind_model(Tape& t, const ParamStore& store, const ModelConfig& cfg);

/// One trial's forward pass with ground-truth history (teacher forcing).
/// Head outputs are stacked over packs: [L+2, L_p].
struct TeacherForcedOut {
  std::vector<Var> states;
  PackPredictionVars packs;
};

TeacherForcedOut forward_teacher_forced(Tape& t, const ModelVars& m,
                                        const Trial& trial,
                                        const ModelConfig& cfg);

/// Autoregressive inference: for each pack index, encode the history of
/// previously decoded packs, predict (X, Y, V) and threshold-decode.
/// Output always has expression length + 2 packs.
Scanpath predict_scanpath(const ImageRaster& image,
                          const ReferringExpression& expression,
                          const ParamStore& params, const ModelConfig& cfg);

/// predict_scanpath over many trials, optionally fanned out over threads.
/// Results are positionally aligned with the input.
std::vector<Scanpath> predict_scanpaths(const std::vector<Trial>& trials,
                                        const ParamStore& params,
                                        const ModelConfig& cfg,
                                        int threads = 1);

}  // namespace orsp
