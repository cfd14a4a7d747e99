#include "orsp/types.hpp"

#include <cmath>
#include <sstream>

namespace orsp {

std::size_t Scanpath::total_fixations() const {
  std::size_t n = 0;
  for (const auto& p : packs) n += p.size();
  return n;
}

std::vector<int> ReferringExpression::with_sentinels() const {
  std::vector<int> ids;
  ids.reserve(token_ids.size() + 2);
  ids.push_back(kBotId);
  ids.insert(ids.end(), token_ids.begin(), token_ids.end());
  ids.push_back(kEotId);
  return ids;
}

ImageRaster ImageRaster::filled(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  ImageRaster img;
  img.rgb.resize(static_cast<std::size_t>(img.height) * img.width * 3);
  for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
    img.rgb[i] = r;
    img.rgb[i + 1] = g;
    img.rgb[i + 2] = b;
  }
  return img;
}

std::vector<std::string> ModelConfig::validate() const {
  std::vector<std::string> v;
  if (l_p < 1) v.push_back("l_p must be >= 1");
  if (d_ctx < 1 || d_hist < 1 || d_mlp < 1 || d_img < 1 || d_emb < 1)
    v.push_back("all widths must be >= 1");
  if (vocab_size < 3) v.push_back("vocab_size must cover BOT/EOT/UNK");
  if (!(decode_threshold > 0.0 && decode_threshold < 1.0))
    v.push_back("decode_threshold must lie in (0,1)");
  if (ablation.no_hesd && ablation.early_fusion)
    v.push_back("no_hesd and early_fusion are mutually exclusive");
  return v;
}

namespace {

bool coord_ok(double c) { return std::isfinite(c) && c >= 0.0 && c <= 1.0; }

}  // namespace

std::vector<std::string> validate_trial(const Trial& trial) {
  std::vector<std::string> violations;
  auto add = [&](const std::string& msg) { violations.push_back(msg); };

  if (trial.image.height != kImageHeight || trial.image.width != kImageWidth) {
    std::ostringstream os;
    os << "image dims " << trial.image.height << "x" << trial.image.width
       << " != " << kImageHeight << "x" << kImageWidth;
    add(os.str());
  }
  if (trial.image.rgb.size() !=
      static_cast<std::size_t>(trial.image.height) * trial.image.width * 3) {
    add("image buffer size does not match dims");
  }

  const auto& expr = trial.expression;
  if (expr.length() < 1) add("expression must contain at least one word");
  if (expr.raw_words.size() != expr.token_ids.size())
    add("raw_words and token_ids lengths differ");
  for (std::size_t i = 0; i < expr.token_ids.size(); ++i) {
    int id = expr.token_ids[i];
    if (id == kBotId || id == kEotId) {
      std::ostringstream os;
      os << "sentinel id " << id << " inside expression at position " << i;
      add(os.str());
    }
    if (id < 0) add("negative token id");
  }

  const std::size_t expected_packs = expr.token_ids.size() + 2;
  if (trial.gt_scanpath.packs.size() != expected_packs) {
    std::ostringstream os;
    os << "pack count " << trial.gt_scanpath.packs.size() << " != "
       << expr.token_ids.size() << "+2";
    add(os.str());
  }
  for (std::size_t j = 0; j < trial.gt_scanpath.packs.size(); ++j) {
    for (std::size_t i = 0; i < trial.gt_scanpath.packs[j].size(); ++i) {
      const Fixation& f = trial.gt_scanpath.packs[j][i];
      if (!coord_ok(f.x)) {
        std::ostringstream os;
        os << "fixation x out of [0,1] at pack " << j << " index " << i;
        add(os.str());
      }
      if (!coord_ok(f.y)) {
        std::ostringstream os;
        os << "fixation y out of [0,1] at pack " << j << " index " << i;
        add(os.str());
      }
    }
  }

  if (trial.target_box) {
    const Box& b = *trial.target_box;
    if (!(coord_ok(b.x0) && coord_ok(b.y0) && coord_ok(b.x1) && coord_ok(b.y1)) ||
        b.x0 > b.x1 || b.y0 > b.y1) {
      add("target_box is not a normalized axis-aligned box");
    }
  }

  return violations;
}

}  // namespace orsp
