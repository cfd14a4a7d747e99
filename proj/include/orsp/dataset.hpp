#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "orsp/rng.hpp"
#include "orsp/types.hpp"

namespace orsp {

/// Synthetic scene/expression/scanpath generator configuration. The seed
/// fully determines the output.
struct SyntheticConfig {
  int n_trials = 100;
  int min_objects = 3;
  int max_objects = 5;
  double sigma_fix = 0.015;  // fixation noise, normalized units
  // Pack-length distribution over lengths 0..6. Most packs take the
  // canonical length for their (token, position); a random_len_prob
  // fraction redraws from this distribution so empty and over-long packs
  // keep appearing.
  std::vector<double> pack_len_probs = {0.05, 0.35, 0.35, 0.15,
                                        0.07, 0.02, 0.01};
  double random_len_prob = 0.15;
  std::uint64_t seed = 0;
  std::vector<std::string> relation_words = {"left", "right", "top", "bottom"};
  std::vector<std::string> color_words = {"red",    "green",  "blue",
                                          "yellow", "purple", "cyan"};
  std::vector<std::string> shape_words = {"square", "wide", "tall"};
};

/// Word <-> id table. Ids 0..2 are BOT/EOT/UNK; dataset words follow in
/// relation, color, shape order.
struct Vocab {
  std::vector<std::string> words;
  std::map<std::string, int> ids;

  int size() const { return static_cast<int>(words.size()); }
  int id_or_unk(const std::string& w) const {
    auto it = ids.find(w);
    return it == ids.end() ? kUnkId : it->second;
  }
};

Vocab make_vocab(const SyntheticConfig& cfg);
Vocab default_vocab();

/// Renders scenes of colored rectangles, emits an expression that becomes
/// unique only at its final word, and builds scanpaths that wander over
/// the still-matching candidates before settling on the target.
/// Throws if a scene cannot be constructed.
std::vector<Trial> generate(const SyntheticConfig& cfg);

struct DatasetSplit {
  std::vector<Trial> train, val, test;
};

/// Disjoint, exhaustive 80/10/10 split by seeded shuffle.
DatasetSplit split_dataset(std::vector<Trial> trials, std::uint64_t seed);

enum class ImageMode { kInline, kExternalRef };

/// One JSON object per line; fixations and boxes in floating pixel
/// coordinates. kInline embeds the raw RGB raster base64-encoded;
/// kExternalRef writes <path stem>_images/<trial_id>.rgb files instead.
void save_jsonl(const std::vector<Trial>& trials, const std::string& path,
                ImageMode mode = ImageMode::kInline);

/// Parses, converts pixels to normalized coordinates, and validates each
/// trial. Errors name the offending line.
std::vector<Trial> load_jsonl(const std::string& path, const Vocab& vocab);

/// Predicted scanpaths: {"trial_id", "packs": [[[x_px, y_px], ...], ...]}.
void save_scanpaths_jsonl(const std::vector<std::string>& trial_ids,
                          const std::vector<Scanpath>& scanpaths,
                          const std::string& path);
std::vector<std::pair<std::string, Scanpath>> load_scanpaths_jsonl(
    const std::string& path);

std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace orsp
