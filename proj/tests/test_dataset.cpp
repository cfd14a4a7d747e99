#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "orsp/dataset.hpp"

using namespace orsp;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "orsp_dataset_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool trials_equal(const Trial& a, const Trial& b) {
  return a.trial_id == b.trial_id && a.image == b.image &&
         a.expression.raw_words == b.expression.raw_words &&
         a.expression.token_ids == b.expression.token_ids &&
         a.gt_scanpath == b.gt_scanpath && a.target_box == b.target_box;
}

}  // namespace

TEST_CASE("vocabulary layout") {
  const Vocab v = default_vocab();
  CHECK(v.size() == 16);
  CHECK(v.words[kBotId] == "<bot>");
  CHECK(v.words[kEotId] == "<eot>");
  CHECK(v.words[kUnkId] == "<unk>");
  CHECK(v.id_or_unk("red") > kUnkId);
  CHECK(v.id_or_unk("nonexistent-word") == kUnkId);
}

TEST_CASE("generation is deterministic under the seed") {
  SyntheticConfig cfg;
  cfg.n_trials = 25;
  cfg.seed = 314;
  const std::vector<Trial> a = generate(cfg);
  const std::vector<Trial> b = generate(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(trials_equal(a[i], b[i]));

  cfg.seed = 315;
  const std::vector<Trial> c = generate(cfg);
  CHECK(!trials_equal(a[0], c[0]));
}

TEST_CASE("every generated trial validates") {
  SyntheticConfig cfg;
  cfg.n_trials = 120;
  cfg.seed = 2718;
  for (const Trial& t : generate(cfg)) {
    const auto violations = validate_trial(t);
    INFO(t.trial_id << (violations.empty() ? "" : ": " + violations.front()));
    CHECK(violations.empty());
  }
}

TEST_CASE("late packs concentrate on the target") {
  SyntheticConfig cfg;
  cfg.n_trials = 150;
  cfg.seed = 777;
  double first_sum = 0.0, last_sum = 0.0;
  long first_n = 0, last_n = 0;
  for (const Trial& t : generate(cfg)) {
    REQUIRE(t.target_box.has_value());
    const double tx = t.target_box->cx(), ty = t.target_box->cy();
    const FixationPack& first = t.gt_scanpath.packs.front();
    const FixationPack& last = t.gt_scanpath.packs.back();
    for (const Fixation& f : first) {
      first_sum += std::hypot(f.x - tx, f.y - ty);
      ++first_n;
    }
    for (const Fixation& f : last) {
      last_sum += std::hypot(f.x - tx, f.y - ty);
      ++last_n;
    }
  }
  REQUIRE(first_n > 100);
  REQUIRE(last_n > 100);
  CHECK(last_sum / last_n < first_sum / first_n);
}

TEST_CASE("pack lengths exercise the empty and truncation paths") {
  SyntheticConfig cfg;
  cfg.n_trials = 300;
  cfg.seed = 99;
  bool saw_empty = false, saw_long = false;
  for (const Trial& t : generate(cfg))
    for (const auto& pack : t.gt_scanpath.packs) {
      if (pack.empty()) saw_empty = true;
      if (pack.size() > 4) saw_long = true;
    }
  CHECK(saw_empty);
  CHECK(saw_long);
}

TEST_CASE("expressions use known words and both lengths") {
  SyntheticConfig cfg;
  cfg.n_trials = 100;
  cfg.seed = 4242;
  const Vocab vocab = make_vocab(cfg);
  std::set<int> lengths;
  for (const Trial& t : generate(cfg)) {
    lengths.insert(t.expression.length());
    for (std::size_t i = 0; i < t.expression.raw_words.size(); ++i)
      CHECK(vocab.id_or_unk(t.expression.raw_words[i]) ==
            t.expression.token_ids[i]);
    for (int id : t.expression.token_ids) CHECK(id > kUnkId);
  }
  CHECK(lengths.count(2) == 1);
  CHECK(lengths.count(3) == 1);
}

TEST_CASE("split is disjoint and exhaustive at 80/10/10") {
  SyntheticConfig cfg;
  cfg.n_trials = 100;
  cfg.seed = 11;
  std::vector<Trial> trials = generate(cfg);
  const DatasetSplit split = split_dataset(trials, 5);
  CHECK(split.train.size() == 80);
  CHECK(split.val.size() == 10);
  CHECK(split.test.size() == 10);

  std::set<std::string> ids;
  auto collect = [&ids](const std::vector<Trial>& ts) {
    for (const auto& t : ts) ids.insert(t.trial_id);
  };
  collect(split.train);
  collect(split.val);
  collect(split.test);
  CHECK(ids.size() == 100);
}

TEST_CASE("base64 roundtrip over random buffers") {
  Rng rng(55);
  for (int len : {0, 1, 2, 3, 4, 17, 100, 487}) {
    std::vector<std::uint8_t> data(static_cast<std::size_t>(len));
    for (auto& b : data) b = static_cast<std::uint8_t>(rng.uniform_int(256));
    const std::string text = base64_encode(data.data(), data.size());
    CHECK(base64_decode(text) == data);
  }
  CHECK_THROWS(base64_decode("not@base64!"));
}

TEST_CASE("jsonl roundtrip preserves trials") {
  const fs::path dir = temp_dir("roundtrip");
  SyntheticConfig cfg;
  cfg.n_trials = 8;
  cfg.seed = 123;
  const std::vector<Trial> trials = generate(cfg);
  const Vocab vocab = make_vocab(cfg);

  for (const ImageMode mode : {ImageMode::kInline, ImageMode::kExternalRef}) {
    const fs::path path =
        dir / (mode == ImageMode::kInline ? "inline.jsonl" : "ref.jsonl");
    save_jsonl(trials, path.string(), mode);
    const std::vector<Trial> loaded = load_jsonl(path.string(), vocab);
    REQUIRE(loaded.size() == trials.size());
    for (std::size_t i = 0; i < trials.size(); ++i) {
      CHECK(loaded[i].trial_id == trials[i].trial_id);
      CHECK(loaded[i].image == trials[i].image);
      CHECK(loaded[i].expression.raw_words == trials[i].expression.raw_words);
      CHECK(loaded[i].expression.token_ids == trials[i].expression.token_ids);
      REQUIRE(loaded[i].gt_scanpath.packs.size() ==
              trials[i].gt_scanpath.packs.size());
      for (std::size_t j = 0; j < trials[i].gt_scanpath.packs.size(); ++j) {
        const auto& lp = loaded[i].gt_scanpath.packs[j];
        const auto& tp = trials[i].gt_scanpath.packs[j];
        REQUIRE(lp.size() == tp.size());
        for (std::size_t k = 0; k < tp.size(); ++k) {
          // half-pixel bound from the pixel-coordinate file convention
          CHECK(std::abs(lp[k].x - tp[k].x) * kImageWidth <= 0.5);
          CHECK(std::abs(lp[k].y - tp[k].y) * kImageHeight <= 0.5);
        }
      }
    }
  }
}

TEST_CASE("jsonl save is byte-deterministic") {
  const fs::path dir = temp_dir("deterministic");
  SyntheticConfig cfg;
  cfg.n_trials = 5;
  cfg.seed = 321;
  const std::vector<Trial> trials = generate(cfg);
  save_jsonl(trials, (dir / "a.jsonl").string());
  save_jsonl(trials, (dir / "b.jsonl").string());
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
}

TEST_CASE("jsonl loader reports the offending line") {
  const fs::path dir = temp_dir("errors");
  const Vocab vocab = default_vocab();

  SUBCASE("empty file loads an empty dataset") {
    std::ofstream(dir / "empty.jsonl").close();
    CHECK(load_jsonl((dir / "empty.jsonl").string(), vocab).empty());
  }

  SUBCASE("malformed json names the line") {
    SyntheticConfig cfg;
    cfg.n_trials = 2;
    cfg.seed = 9;
    save_jsonl(generate(cfg), (dir / "bad.jsonl").string());
    std::ofstream out(dir / "bad.jsonl", std::ios::app | std::ios::binary);
    out << "{not json\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_jsonl((dir / "bad.jsonl").string(), vocab),
                         doctest::Contains("line 3"), std::runtime_error);
  }

  SUBCASE("pack count mismatch names the line") {
    SyntheticConfig cfg;
    cfg.n_trials = 1;
    cfg.seed = 10;
    std::vector<Trial> trials = generate(cfg);
    trials[0].gt_scanpath.packs.pop_back();
    save_jsonl(trials, (dir / "mismatch.jsonl").string());
    CHECK_THROWS_WITH_AS(load_jsonl((dir / "mismatch.jsonl").string(), vocab),
                         doctest::Contains("line 1"), std::runtime_error);
  }

  SUBCASE("out-of-image coordinate names the line") {
    std::ofstream out(dir / "coord.jsonl", std::ios::binary);
    out << R"({"trial_id":"x","width":520,"height":312,"image_b64":")"
        << base64_encode(ImageRaster::filled(0, 0, 0).rgb.data(),
                         ImageRaster::filled(0, 0, 0).rgb.size())
        << R"(","words":["red"],"packs":[[],[[600.0,100.0]],[]],"target_box":null})"
        << "\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_jsonl((dir / "coord.jsonl").string(), vocab),
                         doctest::Contains("outside image"),
                         std::runtime_error);
  }

  SUBCASE("unknown words map to UNK") {
    SyntheticConfig cfg;
    cfg.n_trials = 1;
    cfg.seed = 12;
    std::vector<Trial> trials = generate(cfg);
    trials[0].expression.raw_words[0] = "zebra";
    save_jsonl(trials, (dir / "unk.jsonl").string());
    const std::vector<Trial> loaded =
        load_jsonl((dir / "unk.jsonl").string(), vocab);
    CHECK(loaded[0].expression.token_ids[0] == kUnkId);
  }
}

TEST_CASE("predicted scanpath files roundtrip") {
  const fs::path dir = temp_dir("preds");
  Rng rng(5);
  std::vector<std::string> ids = {"a", "b"};
  std::vector<Scanpath> sps(2);
  sps[0].packs = {{}, {{0.25, 0.75}}, {{0.5, 0.5}, {0.1, 0.9}}};
  sps[1].packs = {{{0.0, 0.0}}, {}, {{1.0, 1.0}}};
  save_scanpaths_jsonl(ids, sps, (dir / "preds.jsonl").string());
  const auto loaded = load_scanpaths_jsonl((dir / "preds.jsonl").string());
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].first == "a");
  CHECK(loaded[1].second.packs[2][0].x == doctest::Approx(1.0));
  CHECK(loaded[0].second.packs[2].size() == 2);
}

TEST_CASE("infeasible generator configs throw") {
  SyntheticConfig cfg;
  cfg.min_objects = 1;
  cfg.max_objects = 1;
  CHECK_THROWS(generate(cfg));
}
