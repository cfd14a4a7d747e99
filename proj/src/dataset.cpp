#include "orsp/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace orsp {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Rgb {
  std::uint8_t r, g, b;
};

// Fill colors parallel to the default color words; extra words cycle.
constexpr std::array<Rgb, 8> kPalette = {{{214, 48, 38},
                                          {60, 186, 84},
                                          {52, 101, 226},
                                          {238, 218, 62},
                                          {154, 74, 208},
                                          {64, 196, 212},
                                          {232, 134, 38},
                                          {150, 100, 60}}};
constexpr Rgb kBackground{28, 30, 34};

enum ShapeClass { kSquare = 0, kWide = 1, kTall = 2 };

struct SceneObject {
  Box box;  // normalized
  int color = 0;
  int shape = kSquare;
};

struct WordSpec {
  enum Kind { kRelation, kColor, kShape } kind;
  int index;  // relation id 0..3 (left/right/top/bottom) or palette/shape idx
};

bool matches(const SceneObject& obj, const WordSpec& w) {
  switch (w.kind) {
    case WordSpec::kRelation:
      switch (w.index) {
        case 0: return obj.box.cx() < 0.5;
        case 1: return obj.box.cx() >= 0.5;
        case 2: return obj.box.cy() < 0.5;
        default: return obj.box.cy() >= 0.5;
      }
    case WordSpec::kColor: return obj.color == w.index;
    case WordSpec::kShape: return obj.shape == w.index;
  }
  return false;
}

bool matches_all(const SceneObject& obj, const std::vector<WordSpec>& words) {
  for (const auto& w : words)
    if (!matches(obj, w)) return false;
  return true;
}

int draw_from(const std::vector<double>& probs, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

// Canonical pack length for a (token, position) pair: a fixed draw from
// the length distribution, so length is predictable from the prefix.
int canonical_length(const SyntheticConfig& cfg, int token_id, int pack_idx) {
  Rng h(cfg.seed ^ (static_cast<std::uint64_t>(token_id) * 0x100000001b3ULL +
                    static_cast<std::uint64_t>(pack_idx) * 0x9e3779b97f4a7c15ULL +
                    0x5bd1e995ULL));
  return draw_from(cfg.pack_len_probs, h);
}

// near-equal areas across shape classes
std::pair<double, double> shape_dims_px(int shape, double scale) {
  switch (shape) {
    case kWide: return {84.0 * scale, 43.0 * scale};
    case kTall: return {43.0 * scale, 84.0 * scale};
    default: return {60.0 * scale, 60.0 * scale};
  }
}

bool boxes_clear(const Box& a, const Box& b, double margin) {
  return a.x1 + margin < b.x0 || b.x1 + margin < a.x0 ||
         a.y1 + margin < b.y0 || b.y1 + margin < a.y0;
}

// Places a box of the given shape whose center satisfies `center_ok`,
// clear of existing objects. Returns false when attempts run out.
bool place_object(SceneObject& obj, const std::vector<SceneObject>& placed,
                  Rng& rng, const std::function<bool(double, double)>& center_ok) {
  const double margin_px = 6.0;
  for (int attempt = 0; attempt < 60; ++attempt) {
    const double scale = rng.uniform(0.95, 1.05);
    auto [w_px, h_px] = shape_dims_px(obj.shape, scale);
    const double w = w_px / kImageWidth;
    const double h = h_px / kImageHeight;
    const double cx = rng.uniform(w / 2 + 0.01, 1.0 - w / 2 - 0.01);
    const double cy = rng.uniform(h / 2 + 0.01, 1.0 - h / 2 - 0.01);
    if (!center_ok(cx, cy)) continue;
    Box b{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
    bool clear = true;
    for (const auto& other : placed)
      if (!boxes_clear(b, other.box, margin_px / kImageWidth)) {
        clear = false;
        break;
      }
    if (!clear) continue;
    obj.box = b;
    return true;
  }
  return false;
}

void draw_scene(ImageRaster& img, const std::vector<SceneObject>& objects) {
  img = ImageRaster::filled(kBackground.r, kBackground.g, kBackground.b);
  for (const auto& obj : objects) {
    const Rgb c = kPalette[static_cast<std::size_t>(obj.color) % kPalette.size()];
    const int x0 = std::max(0, static_cast<int>(std::lround(obj.box.x0 * kImageWidth)));
    const int x1 = std::min(kImageWidth, static_cast<int>(std::lround(obj.box.x1 * kImageWidth)));
    const int y0 = std::max(0, static_cast<int>(std::lround(obj.box.y0 * kImageHeight)));
    const int y1 = std::min(kImageHeight, static_cast<int>(std::lround(obj.box.y1 * kImageHeight)));
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) img.set(x, y, c.r, c.g, c.b);
  }
}

Fixation noisy_point(double cx, double cy, double sigma, Rng& rng) {
  return {std::clamp(cx + rng.normal(0.0, sigma), 0.0, 1.0),
          std::clamp(cy + rng.normal(0.0, sigma), 0.0, 1.0)};
}

struct SceneResult {
  std::vector<SceneObject> objects;
  int target = 0;
  std::vector<WordSpec> word_specs;
  std::vector<std::string> words;
};

// Builds a scene whose expression disambiguates only at its final word:
// one distractor survives every prefix but the full expression. The final
// word is the color, and the target's color is unique in the scene, so
// hearing it pins the referent.
bool build_scene(const SyntheticConfig& cfg, Rng& rng, SceneResult& out) {
  const int n_colors = static_cast<int>(cfg.color_words.size());
  const int n_shapes = static_cast<int>(cfg.shape_words.size());
  const int k = cfg.min_objects + rng.uniform_int(cfg.max_objects - cfg.min_objects + 1);
  const bool long_form = k >= 3 && rng.uniform() < 0.6;

  out.objects.clear();
  out.word_specs.clear();
  out.words.clear();

  SceneObject target;
  target.color = rng.uniform_int(n_colors);
  target.shape = rng.uniform_int(n_shapes);
  auto anywhere = [](double, double) { return true; };
  if (!place_object(target, out.objects, rng, anywhere)) return false;
  out.objects.push_back(target);
  out.target = 0;

  std::vector<WordSpec> specs;
  if (long_form) {
    const bool x_axis = rng.uniform() < 0.5;
    int rel;
    if (x_axis)
      rel = target.box.cx() < 0.5 ? 0 : 1;
    else
      rel = target.box.cy() < 0.5 ? 2 : 3;
    specs.push_back({WordSpec::kRelation, rel});
  }
  specs.push_back({WordSpec::kShape, target.shape});
  specs.push_back({WordSpec::kColor, target.color});

  auto same_half = [&specs](double cx, double cy) {
    if (specs[0].kind != WordSpec::kRelation) return true;
    switch (specs[0].index) {
      case 0: return cx < 0.5;
      case 1: return cx >= 0.5;
      case 2: return cy < 0.5;
      default: return cy >= 0.5;
    }
  };
  auto other_color = [&](Rng& r) {
    return (target.color + 1 + r.uniform_int(n_colors - 1)) % n_colors;
  };

  // d1 survives every prefix but the color: same half, same shape.
  SceneObject d1;
  d1.color = other_color(rng);
  d1.shape = target.shape;
  if (!place_object(d1, out.objects, rng, same_half)) return false;
  out.objects.push_back(d1);

  // d2 keeps the relation word ambiguous in the long form.
  if (long_form) {
    SceneObject d2;
    d2.color = other_color(rng);
    d2.shape = rng.uniform_int(n_shapes);
    if (!place_object(d2, out.objects, rng, same_half)) return false;
    out.objects.push_back(d2);
  }

  while (static_cast<int>(out.objects.size()) < k) {
    SceneObject extra;
    extra.color = other_color(rng);  // target color stays unique
    extra.shape = rng.uniform_int(n_shapes);
    if (!place_object(extra, out.objects, rng, anywhere)) return false;
    out.objects.push_back(extra);
  }

  out.word_specs = specs;
  for (const auto& w : specs) {
    switch (w.kind) {
      case WordSpec::kRelation:
        out.words.push_back(cfg.relation_words[static_cast<std::size_t>(w.index)]);
        break;
      case WordSpec::kColor:
        out.words.push_back(cfg.color_words[static_cast<std::size_t>(w.index)]);
        break;
      case WordSpec::kShape:
        out.words.push_back(cfg.shape_words[static_cast<std::size_t>(w.index)]);
        break;
    }
  }
  return true;
}

}  // namespace

Vocab make_vocab(const SyntheticConfig& cfg) {
  Vocab v;
  v.words = {"<bot>", "<eot>", "<unk>"};
  auto extend = [&v](const std::vector<std::string>& ws) {
    for (const auto& w : ws) v.words.push_back(w);
  };
  extend(cfg.relation_words);
  extend(cfg.color_words);
  extend(cfg.shape_words);
  for (std::size_t i = 0; i < v.words.size(); ++i)
    v.ids[v.words[i]] = static_cast<int>(i);
  return v;
}

Vocab default_vocab() { return make_vocab(SyntheticConfig{}); }

std::vector<Trial> generate(const SyntheticConfig& cfg) {
  if (cfg.min_objects < 2 || cfg.max_objects < cfg.min_objects)
    throw std::invalid_argument("generate: need at least 2 objects per scene");
  if (cfg.pack_len_probs.empty())
    throw std::invalid_argument("generate: empty pack length distribution");

  const Vocab vocab = make_vocab(cfg);
  std::vector<Trial> trials;
  trials.reserve(static_cast<std::size_t>(cfg.n_trials));

  for (int i = 0; i < cfg.n_trials; ++i) {
    Rng rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(i) + 1)));

    SceneResult scene;
    bool ok = false;
    for (int restart = 0; restart < 25 && !ok; ++restart)
      ok = build_scene(cfg, rng, scene);
    if (!ok)
      throw std::runtime_error(
          "generate: could not build a unique scene; config infeasible");

    Trial trial;
    {
      std::ostringstream os;
      os << "t" << std::setw(5) << std::setfill('0') << i;
      trial.trial_id = os.str();
    }
    draw_scene(trial.image, scene.objects);
    const SceneObject& target = scene.objects[static_cast<std::size_t>(scene.target)];
    trial.target_box = target.box;

    trial.expression.raw_words = scene.words;
    for (const auto& w : scene.words)
      trial.expression.token_ids.push_back(vocab.id_or_unk(w));

    const std::vector<int> ids = trial.expression.with_sentinels();
    const int total_packs = static_cast<int>(ids.size());
    for (int j = 0; j < total_packs; ++j) {
      int len = canonical_length(cfg, ids[static_cast<std::size_t>(j)], j);
      if (rng.uniform() < cfg.random_len_prob)
        len = draw_from(cfg.pack_len_probs, rng);

      // Candidates still matching the prefix heard so far.
      std::vector<const SceneObject*> pool;
      if (j == 0) {
        // pre-speech: nothing heard yet
      } else {
        const int words_heard = std::min<int>(j, static_cast<int>(scene.word_specs.size()));
        const std::vector<WordSpec> prefix(scene.word_specs.begin(),
                                           scene.word_specs.begin() + words_heard);
        for (const auto& obj : scene.objects)
          if (matches_all(obj, prefix)) pool.push_back(&obj);
        std::sort(pool.begin(), pool.end(),
                  [](const SceneObject* a, const SceneObject* b) {
                    if (a->box.cx() != b->box.cx()) return a->box.cx() < b->box.cx();
                    return a->box.cy() < b->box.cy();
                  });
      }

      FixationPack pack;
      for (int f = 0; f < len; ++f) {
        if (pool.empty()) {
          pack.push_back(noisy_point(0.5, 0.5, 2.0 * cfg.sigma_fix, rng));
        } else {
          // dwell on the leftmost still-plausible candidate
          const SceneObject* obj = pool.front();
          pack.push_back(
              noisy_point(obj->box.cx(), obj->box.cy(), cfg.sigma_fix, rng));
        }
      }
      trial.gt_scanpath.packs.push_back(std::move(pack));
    }
    trials.push_back(std::move(trial));
  }
  return trials;
}

DatasetSplit split_dataset(std::vector<Trial> trials, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> order(trials.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  const std::size_t n = trials.size();
  const std::size_t n_train = (n * 8) / 10;
  const std::size_t n_val = n / 10;
  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    Trial& t = trials[order[i]];
    if (i < n_train)
      split.train.push_back(std::move(t));
    else if (i < n_train + n_val)
      split.val.push_back(std::move(t));
    else
      split.test.push_back(std::move(t));
  }
  return split;
}

// ---- serialization ---------------------------------------------------------

namespace {

constexpr char kB64Chars[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

json pack_to_pixels(const FixationPack& pack) {
  json arr = json::array();
  for (const Fixation& f : pack)
    arr.push_back({f.x * kImageWidth, f.y * kImageHeight});
  return arr;
}

FixationPack pack_from_pixels(const json& arr, int line_no) {
  FixationPack pack;
  for (const auto& pt : arr) {
    if (!pt.is_array() || pt.size() != 2)
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": fixation is not an [x, y] pair");
    const double x_px = pt[0].get<double>();
    const double y_px = pt[1].get<double>();
    if (!(x_px >= 0.0 && x_px <= kImageWidth && y_px >= 0.0 &&
          y_px <= kImageHeight))
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": coordinate outside image");
    pack.push_back({x_px / kImageWidth, y_px / kImageHeight});
  }
  return pack;
}

}  // namespace

std::string base64_encode(const std::uint8_t* data, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    std::uint32_t chunk = static_cast<std::uint32_t>(data[i]) << 16;
    if (i + 1 < len) chunk |= static_cast<std::uint32_t>(data[i + 1]) << 8;
    if (i + 2 < len) chunk |= data[i + 2];
    out.push_back(kB64Chars[(chunk >> 18) & 63]);
    out.push_back(kB64Chars[(chunk >> 12) & 63]);
    out.push_back(i + 1 < len ? kB64Chars[(chunk >> 6) & 63] : '=');
    out.push_back(i + 2 < len ? kB64Chars[chunk & 63] : '=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    if (c == '=') return -1;
    throw std::runtime_error("base64: invalid character");
  };
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t chunk = 0;
  int have = 0;
  for (char c : text) {
    const int v = value_of(c);
    if (v < 0) break;  // padding
    chunk = (chunk << 6) | static_cast<std::uint32_t>(v);
    if (++have == 4) {
      out.push_back(static_cast<std::uint8_t>((chunk >> 16) & 0xff));
      out.push_back(static_cast<std::uint8_t>((chunk >> 8) & 0xff));
      out.push_back(static_cast<std::uint8_t>(chunk & 0xff));
      chunk = 0;
      have = 0;
    }
  }
  if (have == 3) {
    chunk <<= 6;
    out.push_back(static_cast<std::uint8_t>((chunk >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((chunk >> 8) & 0xff));
  } else if (have == 2) {
    chunk <<= 12;
    out.push_back(static_cast<std::uint8_t>((chunk >> 16) & 0xff));
  } else if (have == 1) {
    throw std::runtime_error("base64: truncated input");
  }
  return out;
}

void save_jsonl(const std::vector<Trial>& trials, const std::string& path,
                ImageMode mode) {
  fs::path image_dir;
  if (mode == ImageMode::kExternalRef) {
    image_dir = fs::path(path);
    image_dir.replace_extension();
    image_dir += "_images";
    fs::create_directories(image_dir);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_jsonl: cannot open " + path);
  for (const Trial& t : trials) {
    json line;
    line["trial_id"] = t.trial_id;
    line["width"] = t.image.width;
    line["height"] = t.image.height;
    if (mode == ImageMode::kInline) {
      line["image_b64"] = base64_encode(t.image.rgb.data(), t.image.rgb.size());
    } else {
      const fs::path img_path = image_dir / (t.trial_id + ".rgb");
      std::ofstream img(img_path, std::ios::binary);
      img.write(reinterpret_cast<const char*>(t.image.rgb.data()),
                static_cast<std::streamsize>(t.image.rgb.size()));
      line["image_ref"] =
          (image_dir.filename() / (t.trial_id + ".rgb")).string();
    }
    line["words"] = t.expression.raw_words;
    json packs = json::array();
    for (const auto& p : t.gt_scanpath.packs) packs.push_back(pack_to_pixels(p));
    line["packs"] = packs;
    if (t.target_box) {
      const Box& b = *t.target_box;
      line["target_box"] = {b.x0 * kImageWidth, b.y0 * kImageHeight,
                            b.x1 * kImageWidth, b.y1 * kImageHeight};
    } else {
      line["target_box"] = nullptr;
    }
    out << line.dump() << "\n";
  }
}

std::vector<Trial> load_jsonl(const std::string& path, const Vocab& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_jsonl: cannot open " + path);
  const fs::path base_dir = fs::path(path).parent_path();

  std::vector<Trial> trials;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.empty()) continue;
    json line;
    try {
      line = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " +
                               e.what());
    }
    auto fail = [line_no](const std::string& msg) -> std::runtime_error {
      return std::runtime_error("line " + std::to_string(line_no) + ": " + msg);
    };

    Trial t;
    try {
      t.trial_id = line.at("trial_id").get<std::string>();
      t.image.width = line.at("width").get<int>();
      t.image.height = line.at("height").get<int>();
      if (line.contains("image_b64")) {
        t.image.rgb = base64_decode(line["image_b64"].get<std::string>());
      } else if (line.contains("image_ref")) {
        const fs::path img_path =
            base_dir / line["image_ref"].get<std::string>();
        std::ifstream img(img_path, std::ios::binary);
        if (!img) throw fail("missing image file " + img_path.string());
        t.image.rgb.assign(std::istreambuf_iterator<char>(img),
                           std::istreambuf_iterator<char>());
      } else {
        throw fail("neither image_b64 nor image_ref present");
      }
      for (const auto& w : line.at("words")) {
        const std::string word = w.get<std::string>();
        t.expression.raw_words.push_back(word);
        t.expression.token_ids.push_back(vocab.id_or_unk(word));
      }
      for (const auto& p : line.at("packs"))
        t.gt_scanpath.packs.push_back(pack_from_pixels(p, line_no));
      if (line.contains("target_box") && !line["target_box"].is_null()) {
        const auto& tb = line["target_box"];
        if (!tb.is_array() || tb.size() != 4) throw fail("bad target_box");
        t.target_box = Box{tb[0].get<double>() / kImageWidth,
                           tb[1].get<double>() / kImageHeight,
                           tb[2].get<double>() / kImageWidth,
                           tb[3].get<double>() / kImageHeight};
      }
    } catch (const json::exception& e) {
      throw fail(e.what());
    }

    if (auto violations = validate_trial(t); !violations.empty())
      throw fail(violations.front());
    trials.push_back(std::move(t));
  }
  return trials;
}

void save_scanpaths_jsonl(const std::vector<std::string>& trial_ids,
                          const std::vector<Scanpath>& scanpaths,
                          const std::string& path) {
  if (trial_ids.size() != scanpaths.size())
    throw std::invalid_argument("save_scanpaths_jsonl: id/path count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_scanpaths_jsonl: cannot open " + path);
  for (std::size_t i = 0; i < scanpaths.size(); ++i) {
    json line;
    line["trial_id"] = trial_ids[i];
    json packs = json::array();
    for (const auto& p : scanpaths[i].packs) packs.push_back(pack_to_pixels(p));
    line["packs"] = packs;
    out << line.dump() << "\n";
  }
}

std::vector<std::pair<std::string, Scanpath>> load_scanpaths_jsonl(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_scanpaths_jsonl: cannot open " + path);
  std::vector<std::pair<std::string, Scanpath>> out;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.empty()) continue;
    json line;
    try {
      line = json::parse(raw);
      Scanpath sp;
      for (const auto& p : line.at("packs"))
        sp.packs.push_back(pack_from_pixels(p, line_no));
      out.emplace_back(line.at("trial_id").get<std::string>(), std::move(sp));
    } catch (const json::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  return out;
}

}  // namespace orsp
