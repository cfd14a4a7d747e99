#include "orsp/hesd.hpp"

namespace orsp {

HesdParams bind_hesd_params(Tape& t, const ParamStore& store,
                            const ModelConfig& cfg) {
  HesdParams p;
  if (cfg.ablation.no_hesd) {
    p.lin_w = t.param(store, "hesd.lin_w");
    p.lin_b = t.param(store, "hesd.lin_b");
    return p;
  }
  p.gru.w_z = t.param(store, "hesd.gru.w_z");
  p.gru.w_r = t.param(store, "hesd.gru.w_r");
  p.gru.w_h = t.param(store, "hesd.gru.w_h");
  p.gru.b_z = t.param(store, "hesd.gru.b_z");
  p.gru.b_r = t.param(store, "hesd.gru.b_r");
  p.gru.b_h = t.param(store, "hesd.gru.b_h");
  p.x_w1 = t.param(store, "hesd.x.w1");
  p.x_b1 = t.param(store, "hesd.x.b1");
  p.x_w2 = t.param(store, "hesd.x.w2");
  p.x_b2 = t.param(store, "hesd.x.b2");
  p.y_w1 = t.param(store, "hesd.y.w1");
  p.y_b1 = t.param(store, "hesd.y.b1");
  p.y_w2 = t.param(store, "hesd.y.w2");
  p.y_b2 = t.param(store, "hesd.y.b2");
  p.v_w1 = t.param(store, "hesd.v.w1");
  p.v_b1 = t.param(store, "hesd.v.b1");
  p.v_w2 = t.param(store, "hesd.v.w2");
  p.v_b2 = t.param(store, "hesd.v.b2");
  return p;
}

Var history_encode(Tape& t, const HesdParams& p, const HistoryTensor& history,
                   int d_hist) {
  if (history.count() > 0 && history.rows.cols() != 4)
    throw ShapeError("history_encode: rows must have width 4");
  Var h = t.constant(Matrix::Zero(1, d_hist));
  for (Eigen::Index r = 0; r < history.count(); ++r) {
    Var row = t.constant(history.rows.row(r));
    h = gru_cell(t, row, h, p.gru);
  }
  return h;
}

PackPredictionVars predict_pack(Tape& t, const HesdParams& p, Var h_ctx,
                                Var h_hist) {
  Var h = h_hist.valid() ? concat_cols(t, h_ctx, h_hist) : h_ctx;
  PackPredictionVars out;
  out.x = sigmoid(t, mlp2(t, h, p.x_w1, p.x_b1, p.x_w2, p.x_b2));
  out.y = sigmoid(t, mlp2(t, h, p.y_w1, p.y_b1, p.y_w2, p.y_b2));
  out.v = sigmoid(t, mlp2(t, h, p.v_w1, p.v_b1, p.v_w2, p.v_b2));
  return out;
}

PackPredictionVars predict_pack_linear(Tape& t, const HesdParams& p, Var h_ctx,
                                       int l_p) {
  Var raw = affine(t, h_ctx, p.lin_w, p.lin_b);
  PackPredictionVars out;
  out.x = sigmoid(t, slice_cols(t, raw, 0, l_p));
  out.y = sigmoid(t, slice_cols(t, raw, l_p, l_p));
  out.v = sigmoid(t, slice_cols(t, raw, 2 * l_p, l_p));
  return out;
}

}  // namespace orsp
