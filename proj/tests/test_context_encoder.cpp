#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "orsp/context_encoder.hpp"
#include "orsp/model.hpp"
#include "test_util.hpp"

using namespace orsp;
using orsp_test::bitwise_equal;

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

std::vector<Matrix> state_values(Tape& t, const std::vector<Var>& states) {
  std::vector<Matrix> out;
  for (Var v : states) out.push_back(t.value(v));
  return out;
}

}  // namespace

TEST_CASE("patch_means shape and linearity") {
  const Matrix zero = patch_means(ImageRaster::filled(0, 0, 0));
  CHECK(zero.rows() == 1);
  CHECK(zero.cols() == kPatchFeatureDim);
  CHECK(zero.isZero(0.0));

  const Matrix half = patch_means(ImageRaster::filled(128, 128, 128));
  const Matrix full = patch_means(ImageRaster::filled(255, 255, 255));
  CHECK(full.isConstant(1.0, 1e-12));
  CHECK((half - Matrix::Constant(1, kPatchFeatureDim, 128.0 / 255.0))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("image_feature is affine in the patch means") {
  const ModelConfig cfg = small_config();
  Rng rng(1);
  ParamStore store = init_model_params(cfg, rng);

  SUBCASE("all-zero image with zero bias gives a zero feature") {
    Tape t;
    ContextParams p = bind_context_params(t, store, cfg);
    Var f = image_feature(t, p, ImageRaster::filled(0, 0, 0));
    CHECK(t.value(f).isZero(0.0));  // bias starts at zero
  }

  SUBCASE("changing one pixel changes the feature") {
    Tape t;
    ContextParams p = bind_context_params(t, store, cfg);
    ImageRaster img = ImageRaster::filled(40, 80, 120);
    Var f1 = image_feature(t, p, img);
    img.set(13, 27, 200, 10, 10);
    Var f2 = image_feature(t, p, img);
    CHECK(!bitwise_equal(t.value(f1), t.value(f2)));
  }

  SUBCASE("constant images relate affinely") {
    Tape t;
    ContextParams p = bind_context_params(t, store, cfg);
    const Matrix f_half =
        t.value(image_feature(t, p, ImageRaster::filled(128, 128, 128)));
    const Matrix f_full =
        t.value(image_feature(t, p, ImageRaster::filled(255, 255, 255)));
    const Matrix& b = store.value("ctx.img_b");
    // means are c*ones, so f(c) - b is linear in c
    const Matrix lhs = f_full - b;
    const Matrix rhs = (255.0 / 128.0) * (f_half - b);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("wrong raster dims throw") {
    ImageRaster bad;
    bad.height = 100;
    bad.width = 100;
    bad.rgb.assign(100 * 100 * 3, 0);
    CHECK_THROWS(patch_means(bad));
  }
}

TEST_CASE("encode_context is prefix-causal bitwise") {
  const ModelConfig cfg = small_config();
  Rng rng(2);
  ParamStore store = init_model_params(cfg, rng);
  const ImageRaster img = ImageRaster::filled(60, 60, 90);

  std::vector<int> ids = {kBotId, 5, 7, 9, 11, kEotId};
  Tape t;
  ContextParams p = bind_context_params(t, store, cfg);
  Var feat = image_feature(t, p, img);
  auto base = state_values(t, encode_context(t, p, feat, ids, cfg));
  REQUIRE(base.size() == ids.size());

  for (std::size_t k = 1; k + 1 < ids.size(); ++k) {
    std::vector<int> perturbed = ids;
    perturbed[k] = perturbed[k] == 5 ? 6 : 5;
    auto mod = state_values(t, encode_context(t, p, feat, perturbed, cfg));
    for (std::size_t j = 0; j < ids.size(); ++j) {
      INFO("k=" << k << " j=" << j);
      if (j < k)
        CHECK(bitwise_equal(base[j], mod[j]));
      else
        CHECK(!bitwise_equal(base[j], mod[j]));
    }
  }
}

TEST_CASE("encode_context output shape and error paths") {
  const ModelConfig cfg = small_config();
  Rng rng(3);
  ParamStore store = init_model_params(cfg, rng);
  Tape t;
  ContextParams p = bind_context_params(t, store, cfg);
  Var feat = image_feature(t, p, ImageRaster::filled(10, 20, 30));

  SUBCASE("single-word expression gives exactly three states") {
    auto states = encode_context(t, p, feat, {kBotId, 4, kEotId}, cfg);
    CHECK(states.size() == 3);
    for (Var v : states) {
      CHECK(t.value(v).rows() == 1);
      CHECK(t.value(v).cols() == cfg.d_ctx);
    }
  }

  SUBCASE("token id at vocab size throws") {
    CHECK_THROWS_AS(
        encode_context(t, p, feat, {kBotId, cfg.vocab_size, kEotId}, cfg),
        std::out_of_range);
  }
}

TEST_CASE("different images steer every state") {
  const ModelConfig cfg = small_config();
  Rng rng(4);
  ParamStore store = init_model_params(cfg, rng);
  const std::vector<int> ids = {kBotId, 3, 8, kEotId};

  Tape t;
  ContextParams p = bind_context_params(t, store, cfg);
  Var f1 = image_feature(t, p, ImageRaster::filled(10, 20, 30));
  Var f2 = image_feature(t, p, ImageRaster::filled(200, 100, 50));
  auto s1 = state_values(t, encode_context(t, p, f1, ids, cfg));
  auto s2 = state_values(t, encode_context(t, p, f2, ids, cfg));
  for (std::size_t j = 0; j < ids.size(); ++j)
    CHECK(!bitwise_equal(s1[j], s2[j]));
}

TEST_CASE("next_token_logits with zero state and weights is uniform") {
  const ModelConfig cfg = small_config();
  Rng rng(5);
  ParamStore store = init_model_params(cfg, rng);
  store.value("ctx.head_w").setZero();

  Tape t;
  ContextParams p = bind_context_params(t, store, cfg);
  Var h = t.constant(Matrix::Zero(1, cfg.d_ctx));
  Var logits = next_token_logits(t, p, h);
  CHECK(t.value(logits).isZero(0.0));  // uniform softmax
}

TEST_CASE("early fusion reduces to plain encoding on zero history") {
  ModelConfig cfg = small_config();
  cfg.ablation.early_fusion = true;
  Rng rng(6);
  ParamStore store = init_model_params(cfg, rng);
  const std::vector<int> ids = {kBotId, 5, 9, kEotId};

  Tape t;
  ContextParams p = bind_context_params(t, store, cfg);
  Var feat = image_feature(t, p, ImageRaster::filled(90, 60, 30));

  std::vector<Var> zero_hist;
  for (std::size_t j = 0; j < ids.size(); ++j)
    zero_hist.push_back(t.constant(Matrix::Zero(1, cfg.d_hist)));

  auto plain = state_values(t, encode_context(t, p, feat, ids, cfg));
  auto fused = state_values(
      t, encode_context_early_fusion(t, p, feat, ids, zero_hist, cfg));
  REQUIRE(plain.size() == fused.size());
  for (std::size_t j = 0; j < plain.size(); ++j)
    CHECK(bitwise_equal(plain[j], fused[j]));
}

TEST_CASE("early fusion history at one position only affects later states") {
  ModelConfig cfg = small_config();
  cfg.ablation.early_fusion = true;
  Rng rng(7);
  ParamStore store = init_model_params(cfg, rng);
  const std::vector<int> ids = {kBotId, 5, 9, 12, kEotId};
  const std::size_t k = 2;

  Tape t;
  ContextParams p = bind_context_params(t, store, cfg);
  Var feat = image_feature(t, p, ImageRaster::filled(90, 60, 30));

  std::vector<Var> zero_hist, bumped_hist;
  for (std::size_t j = 0; j < ids.size(); ++j) {
    zero_hist.push_back(t.constant(Matrix::Zero(1, cfg.d_hist)));
    Matrix h = Matrix::Zero(1, cfg.d_hist);
    if (j == k) h.setConstant(0.7);
    bumped_hist.push_back(t.constant(h));
  }

  auto base = state_values(
      t, encode_context_early_fusion(t, p, feat, ids, zero_hist, cfg));
  auto bumped = state_values(
      t, encode_context_early_fusion(t, p, feat, ids, bumped_hist, cfg));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    INFO("j=" << j);
    if (j < k)
      CHECK(bitwise_equal(base[j], bumped[j]));
    else
      CHECK(!bitwise_equal(base[j], bumped[j]));
  }
}

TEST_CASE("determinism: identical inputs give bitwise identical states") {
  const ModelConfig cfg = small_config();
  Rng rng(8);
  ParamStore store = init_model_params(cfg, rng);
  const std::vector<int> ids = {kBotId, 4, 6, kEotId};
  const ImageRaster img = ImageRaster::filled(77, 55, 33);

  auto run = [&] {
    Tape t;
    ContextParams p = bind_context_params(t, store, cfg);
    Var feat = image_feature(t, p, img);
    return state_values(t, encode_context(t, p, feat, ids, cfg));
  };
  auto a = run();
  auto b = run();
  for (std::size_t j = 0; j < a.size(); ++j) CHECK(bitwise_equal(a[j], b[j]));
}
