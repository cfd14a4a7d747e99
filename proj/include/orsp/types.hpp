#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace orsp {

// Reserved vocabulary ids. BOT/EOT bracket every expression; UNK absorbs
// words outside the dataset vocabulary at inference time.
inline constexpr int kBotId = 0;
inline constexpr int kEotId = 1;
inline constexpr int kUnkId = 2;

inline constexpr int kImageHeight = 312;
inline constexpr int kImageWidth = 520;

/// A single gaze point, normalized to [0,1] x [0,1].
/// Pixel coordinates are (x * width, y * height).
struct Fixation {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Fixation&, const Fixation&) = default;
};

/// Ordered fixations attributed to one token of the expression.
using FixationPack = std::vector<Fixation>;

/// Packs for BOT, w_1..w_L, EOT in temporal order; always L+2 entries.
struct Scanpath {
  std::vector<FixationPack> packs;

  std::size_t total_fixations() const;
  friend bool operator==(const Scanpath&, const Scanpath&) = default;
};

/// Tokenized expression, w_1..w_L only. BOT/EOT are implicit sentinels
/// prepended/appended when the model consumes it.
struct ReferringExpression {
  std::vector<int> token_ids;
  std::vector<std::string> raw_words;

  int length() const { return static_cast<int>(token_ids.size()); }
  /// Full id sequence {BOT, w_1..w_L, EOT}.
  std::vector<int> with_sentinels() const;
};

/// Interleaved RGB raster, 8-bit channels, row-major. Values are exposed
/// normalized to [0,1].
struct ImageRaster {
  int height = kImageHeight;
  int width = kImageWidth;
  std::vector<std::uint8_t> rgb;  // height * width * 3

  static ImageRaster filled(std::uint8_t r, std::uint8_t g, std::uint8_t b);

  double at(int x, int y, int channel) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + channel] / 255.0;
  }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto idx = (static_cast<std::size_t>(y) * width + x) * 3;
    rgb[idx] = r;
    rgb[idx + 1] = g;
    rgb[idx + 2] = b;
  }
  friend bool operator==(const ImageRaster&, const ImageRaster&) = default;
};

/// Axis-aligned box in normalized coordinates.
struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  double cx() const { return 0.5 * (x0 + x1); }
  double cy() const { return 0.5 * (y0 + y1); }
  friend bool operator==(const Box&, const Box&) = default;
};

struct Trial {
  std::string trial_id;
  ImageRaster image;
  ReferringExpression expression;
  Scanpath gt_scanpath;
  std::optional<Box> target_box;
};

/// Ablation switches. At most one architectural variant may be active.
struct AblationFlags {
  bool no_hesd = false;
  bool early_fusion = false;
  bool no_txt_loss = false;
  bool use_l2_xy = false;

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct ModelConfig {
  int l_p = 4;           // max fixations per pack
  int d_ctx = 128;       // context encoder state width
  int d_hist = 64;       // history encoder state width
  int d_mlp = 128;       // prediction head hidden width
  int d_img = 64;        // image feature width
  int d_emb = 64;        // token embedding width
  int vocab_size = 16;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  double decode_threshold = 0.5;
  AblationFlags ablation;

  /// Empty if well-formed, otherwise one message per violated constraint.
  std::vector<std::string> validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Reports every invariant violation of a trial; empty means valid.
/// Never throws: validation reports, callers decide.
std::vector<std::string> validate_trial(const Trial& trial);

}  // namespace orsp
