#pragma once

#include <nlohmann/json.hpp>

#include "orsp/metrics.hpp"
#include "orsp/optimizer.hpp"
#include "orsp/types.hpp"

namespace orsp {

inline void to_json(nlohmann::json& j, const AblationFlags& a) {
  j = {{"no_hesd", a.no_hesd},
       {"early_fusion", a.early_fusion},
       {"no_txt_loss", a.no_txt_loss},
       {"use_l2_xy", a.use_l2_xy}};
}

inline void from_json(const nlohmann::json& j, AblationFlags& a) {
  a.no_hesd = j.value("no_hesd", false);
  a.early_fusion = j.value("early_fusion", false);
  a.no_txt_loss = j.value("no_txt_loss", false);
  a.use_l2_xy = j.value("use_l2_xy", false);
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"l_p", c.l_p},
       {"d_ctx", c.d_ctx},
       {"d_hist", c.d_hist},
       {"d_mlp", c.d_mlp},
       {"d_img", c.d_img},
       {"d_emb", c.d_emb},
       {"vocab_size", c.vocab_size},
       {"focal_gamma", c.focal_gamma},
       {"focal_alpha", c.focal_alpha},
       {"decode_threshold", c.decode_threshold},
       {"ablation", c.ablation}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.l_p = j.at("l_p").get<int>();
  c.d_ctx = j.at("d_ctx").get<int>();
  c.d_hist = j.at("d_hist").get<int>();
  c.d_mlp = j.at("d_mlp").get<int>();
  c.d_img = j.at("d_img").get<int>();
  c.d_emb = j.at("d_emb").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.focal_gamma = j.at("focal_gamma").get<double>();
  c.focal_alpha = j.at("focal_alpha").get<double>();
  c.decode_threshold = j.at("decode_threshold").get<double>();
  c.ablation = j.at("ablation").get<AblationFlags>();
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr0", c.lr0},
       {"lr_min", c.lr_min},
       {"warmup_frac", c.warmup_frac},
       {"warmup_steps", c.warmup_steps},
       {"total_steps", c.total_steps},
       {"weight_decay", c.weight_decay},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"eps", c.eps},
       {"grad_accum", c.grad_accum},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"seed", c.seed}};
}

inline void to_json(nlohmann::json& j, const MetricsConfig& c) {
  j = {{"grid_x", c.grid_x},
       {"grid_y", c.grid_y},
       {"sal_x", c.sal_x},
       {"sal_y", c.sal_y},
       {"sigma_px", c.sigma_px}};
}

inline void to_json(nlohmann::json& j, const TrialMetrics& m) {
  j = {{"trial_id", m.trial_id}, {"ss", m.ss},
       {"ss_pack", m.ss_pack},   {"fed", m.fed},
       {"fed_pack", m.fed_pack}, {"cc_pack", m.cc_pack},
       {"nss_pack", m.nss_pack}, {"has_cc", m.has_cc},
       {"has_nss", m.has_nss}};
}

inline void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = {{"ss", r.ss},
       {"ss_pack", r.ss_pack},
       {"fed", r.fed},
       {"fed_pack", r.fed_pack},
       {"cc_pack", r.cc_pack},
       {"nss_pack", r.nss_pack},
       {"n_trials", r.n_trials},
       {"per_trial", r.per_trial}};
}

}  // namespace orsp
