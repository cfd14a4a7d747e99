#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "orsp/dataset.hpp"
#include "orsp/grad_check.hpp"
#include "orsp/losses.hpp"
#include "test_util.hpp"

using namespace orsp;
using orsp_test::random_matrix;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.d_ctx = 16;
  cfg.d_hist = 8;
  cfg.d_mlp = 16;
  cfg.d_img = 8;
  cfg.d_emb = 8;
  cfg.vocab_size = 16;
  return cfg;
}

EncodedScanpath single_slot_target(double gx, double gy, int l_p) {
  Scanpath gt;
  gt.packs = {{{gx, gy}}};
  return encode_scanpath_targets(gt, l_p);
}

}  // namespace

TEST_CASE("loss_txt aligns logits row j with token j+1") {
  SUBCASE("uniform logits give ln(vocab)") {
    Tape t;
    Var logits = t.constant(Matrix::Zero(3, 16));
    Var l = loss_txt(t, logits, {kBotId, 5, 7, kEotId});
    CHECK(t.value(l)(0, 0) == doctest::Approx(std::log(16.0)).epsilon(1e-12));
  }

  SUBCASE("confident correct logits drive the loss to zero") {
    Tape t;
    const std::vector<int> ids = {kBotId, 5, 7, kEotId};
    Matrix logits = Matrix::Zero(3, 16);
    for (int r = 0; r < 3; ++r) logits(r, ids[static_cast<std::size_t>(r) + 1]) = 60.0;
    Var l = loss_txt(t, t.constant(logits), ids);
    CHECK(t.value(l)(0, 0) < 1e-12);
  }
}

TEST_CASE("loss_xy masks padding and normalizes by valid slots") {
  const int l_p = 4;

  SUBCASE("exact prediction scores zero") {
    Tape t;
    const EncodedScanpath gt = single_slot_target(0.4, 0.6, l_p);
    Var x = t.constant(gt.x);
    Var y = t.constant(gt.y);
    CHECK(t.value(loss_xy(t, x, y, gt, false))(0, 0) == 0.0);
  }

  SUBCASE("single valid slot with dx 0.1 dy 0.2 gives 0.3 under L1") {
    Tape t;
    const EncodedScanpath gt = single_slot_target(0.4, 0.6, l_p);
    Matrix px = gt.x, py = gt.y;
    px(0, 0) += 0.1;
    py(0, 0) += 0.2;
    // padding slots may carry junk; the mask must erase it
    px(0, 2) = 0.9;
    py(0, 3) = 0.8;
    Var l = loss_xy(t, t.constant(px), t.constant(py), gt, false);
    CHECK(t.value(l)(0, 0) == doctest::Approx(0.3).epsilon(1e-12));
  }

  SUBCASE("the same instance under L2 gives 0.01 + 0.04") {
    Tape t;
    const EncodedScanpath gt = single_slot_target(0.4, 0.6, l_p);
    Matrix px = gt.x, py = gt.y;
    px(0, 0) += 0.1;
    py(0, 0) += 0.2;
    Var l = loss_xy(t, t.constant(px), t.constant(py), gt, true);
    CHECK(t.value(l)(0, 0) == doctest::Approx(0.05).epsilon(1e-12));
  }

  SUBCASE("a scanpath with no valid slots scores zero") {
    Tape t;
    Scanpath gt;
    gt.packs = {{}, {}};
    const EncodedScanpath enc = encode_scanpath_targets(gt, l_p);
    Var x = t.constant(Matrix::Constant(2, l_p, 0.7));
    Var y = t.constant(Matrix::Constant(2, l_p, 0.2));
    CHECK(t.value(loss_xy(t, x, y, enc, false))(0, 0) == 0.0);
  }

  SUBCASE("L2 path agrees with a straightforward reimplementation") {
    Rng rng(15);
    for (int it = 0; it < 50; ++it) {
      const int packs = 1 + rng.uniform_int(4);
      Scanpath gt;
      for (int j = 0; j < packs; ++j) {
        FixationPack p;
        const int len = rng.uniform_int(5);
        for (int i = 0; i < len; ++i)
          p.push_back({rng.uniform(), rng.uniform()});
        gt.packs.push_back(p);
      }
      const EncodedScanpath enc = encode_scanpath_targets(gt, 4);
      Matrix px(packs, 4), py(packs, 4);
      for (int i = 0; i < px.size(); ++i) {
        px(i) = rng.uniform();
        py(i) = rng.uniform();
      }
      double direct = 0.0;
      int count = 0;
      for (int r = 0; r < packs; ++r)
        for (int c = 0; c < 4; ++c)
          if (enc.mask(r, c) > 0.5) {
            const double dx = px(r, c) - enc.x(r, c);
            const double dy = py(r, c) - enc.y(r, c);
            direct += dx * dx + dy * dy;
            ++count;
          }
      if (count > 0) direct /= count;
      Tape t;
      Var l = loss_xy(t, t.constant(px), t.constant(py), enc, true);
      CHECK(t.value(l)(0, 0) == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("focal loss closed forms") {
  SUBCASE("p 0.5, target 1, gamma 2, alpha 1 gives ln(2)/4") {
    CHECK(focal_scalar(0.5, 1, 1.0, 2.0) ==
          doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-12));
  }

  SUBCASE("near-certain correct prediction is near zero") {
    CHECK(focal_scalar(1.0 - 1e-7, 1, 1.0, 2.0) < 1e-12);
    CHECK(focal_scalar(1e-7, 0, 0.0, 2.0) < 1e-12);
  }

  SUBCASE("gamma 0 with alpha_t forced to 1 reduces to cross-entropy") {
    Rng rng(21);
    for (int it = 0; it < 1000; ++it) {
      const double p = rng.uniform();
      const int y = rng.uniform() < 0.5 ? 0 : 1;
      const double alpha = y == 1 ? 1.0 : 0.0;  // makes alpha_t = 1
      const double pc = std::min(std::max(p, 1e-7), 1.0 - 1e-7);
      const double ce = -std::log(y == 1 ? pc : 1.0 - pc);
      CHECK(std::abs(focal_scalar(p, y, alpha, 0.0) - ce) < 1e-9);
    }
  }
}

TEST_CASE("loss_token closed form over a single pack") {
  // every slot at 0.5 with gamma 2, alpha 0.5: 0.5 * 0.25 * ln 2 per slot
  Tape t;
  Scanpath gt;
  gt.packs = {{{0.3, 0.3}, {0.4, 0.4}}};  // targets: 1 1 0 0
  const EncodedScanpath enc = encode_scanpath_targets(gt, 4);
  Var v = t.constant(Matrix::Constant(1, 4, 0.5));
  Var l = loss_token(t, v, enc, 0.5, 2.0);
  CHECK(t.value(l)(0, 0) ==
        doctest::Approx(0.5 * 0.25 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("full objective on a generated trial") {
  SyntheticConfig dcfg;
  dcfg.n_trials = 2;
  dcfg.seed = 77;
  const std::vector<Trial> trials = generate(dcfg);
  const ModelConfig cfg = small_config();
  Rng rng(3);
  ParamStore store = init_model_params(cfg, rng);

  SUBCASE("total equals the sum of its terms and is finite") {
    Tape t;
    ModelVars m = bind_model(t, store, cfg);
    TeacherForcedOut fwd = forward_teacher_forced(t, m, trials[0], cfg);
    LossVars l = build_losses(t, m, fwd, trials[0], cfg);
    LossBreakdown bd = read_losses(t, l);
    CHECK(std::isfinite(bd.l_total));
    CHECK(bd.l_txt >= 0.0);
    CHECK(bd.l_xy >= 0.0);
    CHECK(bd.l_token >= 0.0);
    CHECK(std::abs(bd.l_total - (bd.l_txt + bd.l_xy + bd.l_token)) <= 1e-12);
  }

  SUBCASE("no_txt_loss zeroes the text term and its head gradients") {
    ModelConfig muted = cfg;
    muted.ablation.no_txt_loss = true;
    Tape t;
    ModelVars m = bind_model(t, store, muted);
    TeacherForcedOut fwd = forward_teacher_forced(t, m, trials[0], muted);
    LossVars l = build_losses(t, m, fwd, trials[0], muted);
    CHECK(read_losses(t, l).l_txt == 0.0);
    store.zero_grads();
    t.backward(l.total, store);
    CHECK(store.grad("ctx.head_w").isZero(0.0));
    CHECK(store.grad("ctx.head_b").isZero(0.0));
    // the rest of the model still trains
    CHECK(!store.grad("ctx.gru.w_z").isZero(0.0));
  }

  SUBCASE("with the text loss on, head gradients flow") {
    Tape t;
    ModelVars m = bind_model(t, store, cfg);
    TeacherForcedOut fwd = forward_teacher_forced(t, m, trials[0], cfg);
    LossVars l = build_losses(t, m, fwd, trials[0], cfg);
    store.zero_grads();
    t.backward(l.total, store);
    CHECK(!store.grad("ctx.head_w").isZero(0.0));
  }

  SUBCASE("composed gradients match finite differences") {
    const Trial& trial = trials[1];
    auto build = [&trial, &cfg](Tape& t, ParamStore& s) {
      ModelVars m = bind_model(t, s, cfg);
      TeacherForcedOut fwd = forward_teacher_forced(t, m, trial, cfg);
      return build_losses(t, m, fwd, trial, cfg).total;
    };
    const GradCheckReport report = grad_check(build, store, 1e-4, 24, 5);
    CHECK(report.worst < 1e-4);
  }
}
