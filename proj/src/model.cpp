#include "orsp/model.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

namespace orsp {

namespace {

Matrix glorot(int rows, int cols, Rng& rng) {
  const double s = std::sqrt(6.0 / (rows + cols));
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-s, s);
  return m;
}

void add_gru(ParamStore& store, const std::string& prefix, int d_in, int d_h,
             Rng& rng) {
  store.add(prefix + ".w_z", glorot(d_in + d_h, d_h, rng));
  store.add(prefix + ".w_r", glorot(d_in + d_h, d_h, rng));
  store.add(prefix + ".w_h", glorot(d_in + d_h, d_h, rng));
  store.add(prefix + ".b_z", Matrix::Zero(1, d_h));
  store.add(prefix + ".b_r", Matrix::Zero(1, d_h));
  store.add(prefix + ".b_h", Matrix::Zero(1, d_h));
}

void add_head(ParamStore& store, const std::string& prefix, int d_in,
              int d_hidden, int d_out, Rng& rng) {
  store.add(prefix + ".w1", glorot(d_in, d_hidden, rng));
  store.add(prefix + ".b1", Matrix::Zero(1, d_hidden));
  store.add(prefix + ".w2", glorot(d_hidden, d_out, rng));
  store.add(prefix + ".b2", Matrix::Zero(1, d_out));
}

}  // namespace

ParamStore init_model_params(const ModelConfig& cfg, Rng& rng) {
  if (auto errs = cfg.validate(); !errs.empty())
    throw std::invalid_argument("invalid ModelConfig: " + errs.front());

  ParamStore store;
  store.add("ctx.emb", glorot(cfg.vocab_size, cfg.d_emb, rng));
  store.add("ctx.img_w", glorot(kPatchFeatureDim, cfg.d_img, rng));
  store.add("ctx.img_b", Matrix::Zero(1, cfg.d_img));
  add_gru(store, "ctx.gru", cfg.d_emb + cfg.d_img, cfg.d_ctx, rng);
  store.add("ctx.head_w", glorot(cfg.d_ctx, cfg.vocab_size, rng));
  store.add("ctx.head_b", Matrix::Zero(1, cfg.vocab_size));
  if (cfg.ablation.early_fusion)
    store.add("ctx.fuse_w", glorot(cfg.d_hist, cfg.d_emb, rng));

  if (cfg.ablation.no_hesd) {
    store.add("hesd.lin_w", glorot(cfg.d_ctx, 3 * cfg.l_p, rng));
    store.add("hesd.lin_b", Matrix::Zero(1, 3 * cfg.l_p));
    return store;
  }
  add_gru(store, "hesd.gru", 4, cfg.d_hist, rng);
  const int head_in = cfg.ablation.early_fusion ? cfg.d_ctx
                                                : cfg.d_ctx + cfg.d_hist;
  add_head(store, "hesd.x", head_in, cfg.d_mlp, cfg.l_p, rng);
  add_head(store, "hesd.y", head_in, cfg.d_mlp, cfg.l_p, rng);
  add_head(store, "hesd.v", head_in, cfg.d_mlp, cfg.l_p, rng);
  return store;
}

ModelVars bind_model(Tape& t, const ParamStore& store, const ModelConfig& cfg) {
  return {bind_context_params(t, store, cfg), bind_hesd_params(t, store, cfg)};
}

TeacherForcedOut forward_teacher_forced(Tape& t, const ModelVars& m,
                                        const Trial& trial,
                                        const ModelConfig& cfg) {
  const std::vector<int> ids = trial.expression.with_sentinels();
  if (trial.gt_scanpath.packs.size() != ids.size())
    throw std::invalid_argument("teacher forcing needs one pack per token");

  Var img = image_feature(t, m.ctx, trial.image);

  // History seen before pack j: truncated ground-truth packs 0..j-1,
  // mirroring what decoding provides at inference time.
  std::vector<Var> hist;
  if (!cfg.ablation.no_hesd) {
    std::vector<FixationPack> seen;
    hist.reserve(ids.size());
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (j > 0)
        seen.push_back(truncate_pack(trial.gt_scanpath.packs[j - 1], cfg.l_p));
      hist.push_back(
          history_encode(t, m.hesd, build_history(seen, cfg.l_p), cfg.d_hist));
    }
  }

  TeacherForcedOut out;
  if (cfg.ablation.early_fusion) {
    out.states = encode_context_early_fusion(t, m.ctx, img, ids, hist, cfg);
    out.packs = predict_pack(t, m.hesd, vstack(t, out.states), Var{});
  } else if (cfg.ablation.no_hesd) {
    out.states = encode_context(t, m.ctx, img, ids, cfg);
    out.packs = predict_pack_linear(t, m.hesd, vstack(t, out.states), cfg.l_p);
  } else {
    out.states = encode_context(t, m.ctx, img, ids, cfg);
    out.packs = predict_pack(t, m.hesd, vstack(t, out.states), vstack(t, hist));
  }
  return out;
}

Scanpath predict_scanpath(const ImageRaster& image,
                          const ReferringExpression& expression,
                          const ParamStore& params, const ModelConfig& cfg) {
  Tape t(/*recording=*/false);
  ModelVars m = bind_model(t, params, cfg);
  const std::vector<int> ids =
      ReferringExpression{expression.token_ids, expression.raw_words}
          .with_sentinels();
  Var img = image_feature(t, m.ctx, image);

  Scanpath result;
  std::vector<FixationPack> decoded;

  auto decode_step = [&](const PackPredictionVars& pred) {
    FixationPack pack = decode_pack(t.value(pred.x), t.value(pred.y),
                                    t.value(pred.v), cfg.decode_threshold);
    decoded.push_back(pack);
    result.packs.push_back(std::move(pack));
  };

  if (cfg.ablation.early_fusion) {
    // History feeds the encoder input, so the recurrence and the decoding
    // advance together.
    Var h = t.constant(Matrix::Zero(1, cfg.d_ctx));
    for (std::size_t j = 0; j < ids.size(); ++j) {
      Var hist =
          history_encode(t, m.hesd, build_history(decoded, cfg.l_p), cfg.d_hist);
      Var tok = slice_rows(t, m.ctx.emb, ids[j], 1);
      tok = add(t, tok, matmul(t, hist, m.ctx.fuse_w));
      h = gru_cell(t, concat_cols(t, tok, img), h, m.ctx.gru);
      decode_step(predict_pack(t, m.hesd, h, Var{}));
    }
    return result;
  }

  const std::vector<Var> states = encode_context(t, m.ctx, img, ids, cfg);
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (cfg.ablation.no_hesd) {
      decode_step(predict_pack_linear(t, m.hesd, states[j], cfg.l_p));
    } else {
      Var hist =
          history_encode(t, m.hesd, build_history(decoded, cfg.l_p), cfg.d_hist);
      decode_step(predict_pack(t, m.hesd, states[j], hist));
    }
  }
  return result;
}

std::vector<Scanpath> predict_scanpaths(const std::vector<Trial>& trials,
                                        const ParamStore& params,
                                        const ModelConfig& cfg, int threads) {
  std::vector<Scanpath> out(trials.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      out[i] = predict_scanpath(trials[i].image, trials[i].expression, params,
                                cfg);
  };
  const int n_threads =
      std::max(1, std::min<int>(threads, static_cast<int>(trials.size())));
  if (n_threads == 1) {
    work(0, trials.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (trials.size() + n_threads - 1) / n_threads;
  for (int k = 0; k < n_threads; ++k) {
    const std::size_t b = static_cast<std::size_t>(k) * chunk;
    const std::size_t e = std::min(trials.size(), b + chunk);
    if (b < e) pool.emplace_back(work, b, e);
  }
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace orsp
