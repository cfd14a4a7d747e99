#pragma once

#include <vector>

#include "orsp/param_store.hpp"
#include "orsp/tape.hpp"
#include "orsp/types.hpp"

namespace orsp {

/// The image descriptor is per-patch channel means on an 8x8 grid:
/// 8 * 8 * 3 = 192 values.
inline constexpr int kPatchGrid = 8;
inline constexpr int kPatchFeatureDim = kPatchGrid * kPatchGrid * 3;

/// Deterministic [1, 192] patch-mean summary of a raster.
Matrix patch_means(const ImageRaster& image);

/// Context-encoder parameters bound onto a tape. fuse_w is only bound
/// when the early-fusion variant is active.
struct ContextParams {
  Var img_w, img_b;    // [192, d_img], [1, d_img]
  Var emb;             // [vocab, d_emb]
  GruVars gru;         // input d_emb + d_img, state d_ctx
  Var head_w, head_b;  // [d_ctx, vocab]
  Var fuse_w;          // [d_hist, d_emb]; invalid unless early_fusion
};

ContextParams bind_context_params(Tape& t, const ParamStore& store,
                                  const ModelConfig& cfg);

/// Trainable affine over the patch means: the stand-in visual encoder.
Var image_feature(Tape& t, const ContextParams& p, const ImageRaster& image);

/// Unidirectional recurrence over the sentinel-bracketed token sequence;
/// entry j is the state after consuming token j, so it depends on the
/// image and tokens 0..j only.
std::vector<Var> encode_context(Tape& t, const ContextParams& p,
                                Var image_feat,
                                const std::vector<int>& token_ids,
                                const ModelConfig& cfg);

/// As encode_context, but each token embedding additionally receives a
/// projection of that position's history encoding before the recurrence.
/// history_per_token[j] must derive from packs before j, so causality is
/// preserved. The projection has no bias: zero history adds nothing.
std::vector<Var> encode_context_early_fusion(
    Tape& t, const ContextParams& p, Var image_feat,
    const std::vector<int>& token_ids,
    const std::vector<Var>& history_per_token, const ModelConfig& cfg);

/// Affine projection of one or more context states to vocabulary logits.
Var next_token_logits(Tape& t, const ContextParams& p, Var states);

}  // namespace orsp
