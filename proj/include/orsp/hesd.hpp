#pragma once

#include "orsp/packcodec.hpp"
#include "orsp/param_store.hpp"
#include "orsp/tape.hpp"
#include "orsp/types.hpp"

namespace orsp {

/// Decoder parameters bound onto a tape. The history GRU and the three
/// MLP heads exist unless no_hesd, which binds the single linear head
/// instead. Head input width is d_ctx + d_hist, or d_ctx under early
/// fusion (history enters at the encoder input instead).
struct HesdParams {
  GruVars gru;                     // input 4, state d_hist
  Var x_w1, x_b1, x_w2, x_b2;
  Var y_w1, y_b1, y_w2, y_b2;
  Var v_w1, v_b1, v_w2, v_b2;
  Var lin_w, lin_b;                // [d_ctx, 3*L_p]; no_hesd only
};

HesdParams bind_hesd_params(Tape& t, const ParamStore& store, const ModelConfig& cfg);

/// Raw head outputs for one or more packs; all entries in [0,1].
struct PackPredictionVars {
  Var x, y, v;  // [n, L_p] each
};

/// Runs the history GRU over the tensor rows from a zero initial state
/// and returns the final state. Empty history returns the zero vector.
Var history_encode(Tape& t, const HesdParams& p, const HistoryTensor& history,
                   int d_hist);

/// Three independent two-layer MLP heads over concat(h_ctx, h_hist); pass
/// an invalid h_hist to feed h_ctx alone (the early-fusion arrangement).
/// Accepts stacked rows: [n, d] in, [n, L_p] out.
PackPredictionVars predict_pack(Tape& t, const HesdParams& p, Var h_ctx,
                                Var h_hist);

/// Single affine d_ctx -> 3*L_p split into X/Y/V thirds; ignores history.
PackPredictionVars predict_pack_linear(Tape& t, const HesdParams& p, Var h_ctx,
                                       int l_p);

}  // namespace orsp
