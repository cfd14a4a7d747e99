#include "orsp/losses.hpp"

namespace orsp {

Var loss_txt(Tape& t, Var logits, const std::vector<int>& ids_with_sentinels) {
  std::vector<int> targets(ids_with_sentinels.begin() + 1,
                           ids_with_sentinels.end());
  return softmax_ce_mean(t, logits, targets);
}

Var loss_xy(Tape& t, Var x_all, Var y_all, const EncodedScanpath& gt,
            bool use_l2) {
  if (gt.valid_count == 0) return t.constant(Matrix::Zero(1, 1));
  Var mask = t.constant(gt.mask);
  Var dx = sub(t, x_all, t.constant(gt.x));
  Var dy = sub(t, y_all, t.constant(gt.y));
  Var tx = use_l2 ? square(t, dx) : abs_op(t, dx);
  Var ty = use_l2 ? square(t, dy) : abs_op(t, dy);
  Var total = add(t, sum(t, cmul(t, tx, mask)), sum(t, cmul(t, ty, mask)));
  return scale(t, total, 1.0 / gt.valid_count);
}

Var loss_token(Tape& t, Var v_all, const EncodedScanpath& gt, double alpha,
               double gamma) {
  return focal_mean(t, v_all, gt.mask, alpha, gamma);
}

LossVars build_losses(Tape& t, const ModelVars& m, const TeacherForcedOut& fwd,
                      const Trial& trial, const ModelConfig& cfg) {
  LossVars l;
  if (cfg.ablation.no_txt_loss) {
    l.txt = t.constant(Matrix::Zero(1, 1));
  } else {
    // States 0..L predict the following token; EOT predicts nothing.
    std::vector<Var> prefix(fwd.states.begin(), fwd.states.end() - 1);
    Var logits = next_token_logits(t, m.ctx, vstack(t, prefix));
    l.txt = loss_txt(t, logits, trial.expression.with_sentinels());
  }
  const EncodedScanpath gt =
      encode_scanpath_targets(trial.gt_scanpath, cfg.l_p);
  l.xy = loss_xy(t, fwd.packs.x, fwd.packs.y, gt, cfg.ablation.use_l2_xy);
  l.token = loss_token(t, fwd.packs.v, gt, cfg.focal_alpha, cfg.focal_gamma);
  l.total = add(t, add(t, l.txt, l.xy), l.token);
  return l;
}

LossBreakdown read_losses(const Tape& t, const LossVars& l) {
  return {t.value(l.txt)(0, 0), t.value(l.xy)(0, 0), t.value(l.token)(0, 0),
          t.value(l.total)(0, 0)};
}

}  // namespace orsp
