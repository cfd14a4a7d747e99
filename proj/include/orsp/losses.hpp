#pragma once

#include "orsp/model.hpp"

namespace orsp {

struct LossVars {
  Var txt, xy, token, total;
};

struct LossBreakdown {
  double l_txt = 0.0;
  double l_xy = 0.0;
  double l_token = 0.0;
  double l_total = 0.0;
};

/// Mean next-token cross-entropy: logits row j predicts token j+1, so the
/// targets are ids 1..L+1 (the words and EOT).
Var loss_txt(Tape& t, Var logits, const std::vector<int>& ids_with_sentinels);

/// Coordinate regression over occupied ground-truth slots only, divided by
/// the number of occupied slots across the scanpath (zero if none).
/// L1 per slot: |dx| + |dy|; with use_l2: dx^2 + dy^2.
Var loss_xy(Tape& t, Var x_all, Var y_all, const EncodedScanpath& gt,
            bool use_l2);

/// Mean focal loss over every slot of every pack, padding included; the
/// padding slots are where the valid/invalid imbalance lives.
Var loss_token(Tape& t, Var v_all, const EncodedScanpath& gt, double alpha,
               double gamma);

/// Assembles the full objective: total = txt + xy + token. The text term
/// is a constant zero under no_txt_loss and contributes no gradient.
LossVars build_losses(Tape& t, const ModelVars& m, const TeacherForcedOut& fwd,
                      const Trial& trial, const ModelConfig& cfg);

LossBreakdown read_losses(const Tape& t, const LossVars& l);

}  // namespace orsp
