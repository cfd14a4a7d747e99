#include "orsp/context_encoder.hpp"

#include <stdexcept>

namespace orsp {

Matrix patch_means(const ImageRaster& image) {
  if (image.height != kImageHeight || image.width != kImageWidth)
    throw std::invalid_argument("patch_means: unexpected raster dims");
  const int ph = image.height / kPatchGrid;  // 39
  const int pw = image.width / kPatchGrid;   // 65
  Matrix out = Matrix::Zero(1, kPatchFeatureDim);
  for (int py = 0; py < kPatchGrid; ++py) {
    for (int px = 0; px < kPatchGrid; ++px) {
      double acc[3] = {0.0, 0.0, 0.0};
      for (int y = py * ph; y < (py + 1) * ph; ++y)
        for (int x = px * pw; x < (px + 1) * pw; ++x)
          for (int c = 0; c < 3; ++c) acc[c] += image.at(x, y, c);
      const double inv = 1.0 / (ph * pw);
      const int base = (py * kPatchGrid + px) * 3;
      for (int c = 0; c < 3; ++c) out(0, base + c) = acc[c] * inv;
    }
  }
  return out;
}

ContextParams bind_context_params(Tape& t, const ParamStore& store,
                                  const ModelConfig& cfg) {
  ContextParams p;
  p.img_w = t.param(store, "ctx.img_w");
  p.img_b = t.param(store, "ctx.img_b");
  p.emb = t.param(store, "ctx.emb");
  p.gru.w_z = t.param(store, "ctx.gru.w_z");
  p.gru.w_r = t.param(store, "ctx.gru.w_r");
  p.gru.w_h = t.param(store, "ctx.gru.w_h");
  p.gru.b_z = t.param(store, "ctx.gru.b_z");
  p.gru.b_r = t.param(store, "ctx.gru.b_r");
  p.gru.b_h = t.param(store, "ctx.gru.b_h");
  p.head_w = t.param(store, "ctx.head_w");
  p.head_b = t.param(store, "ctx.head_b");
  if (cfg.ablation.early_fusion) p.fuse_w = t.param(store, "ctx.fuse_w");
  return p;
}

Var image_feature(Tape& t, const ContextParams& p, const ImageRaster& image) {
  Var means = t.constant(patch_means(image));
  return affine(t, means, p.img_w, p.img_b);
}

namespace {

std::vector<Var> run_recurrence(Tape& t, const ContextParams& p,
                                Var image_feat,
                                const std::vector<int>& token_ids,
                                const std::vector<Var>* history_per_token,
                                const ModelConfig& cfg) {
  if (token_ids.size() < 2)
    throw std::invalid_argument("encode_context: need BOT..EOT sequence");
  for (int id : token_ids)
    if (id < 0 || id >= cfg.vocab_size)
      throw std::out_of_range("encode_context: token id outside vocabulary");
  if (history_per_token && history_per_token->size() != token_ids.size())
    throw std::invalid_argument(
        "encode_context: one history vector per token required");

  std::vector<Var> states;
  states.reserve(token_ids.size());
  Var h = t.constant(Matrix::Zero(1, cfg.d_ctx));
  for (std::size_t j = 0; j < token_ids.size(); ++j) {
    Var tok = slice_rows(t, p.emb, token_ids[j], 1);
    if (history_per_token)
      tok = add(t, tok, matmul(t, (*history_per_token)[j], p.fuse_w));
    Var x = concat_cols(t, tok, image_feat);
    h = gru_cell(t, x, h, p.gru);
    states.push_back(h);
  }
  return states;
}

}  // namespace

std::vector<Var> encode_context(Tape& t, const ContextParams& p,
                                Var image_feat,
                                const std::vector<int>& token_ids,
                                const ModelConfig& cfg) {
  return run_recurrence(t, p, image_feat, token_ids, nullptr, cfg);
}

std::vector<Var> encode_context_early_fusion(
    Tape& t, const ContextParams& p, Var image_feat,
    const std::vector<int>& token_ids,
    const std::vector<Var>& history_per_token, const ModelConfig& cfg) {
  if (!p.fuse_w.valid())
    throw std::invalid_argument(
        "encode_context_early_fusion: fusion projection not bound");
  return run_recurrence(t, p, image_feat, token_ids, &history_per_token, cfg);
}

Var next_token_logits(Tape& t, const ContextParams& p, Var states) {
  return affine(t, states, p.head_w, p.head_b);
}

}  // namespace orsp
