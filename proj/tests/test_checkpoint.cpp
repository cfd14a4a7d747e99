#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "orsp/checkpoint.hpp"
#include "orsp/dataset.hpp"
#include "orsp/model.hpp"

using namespace orsp;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "orsp_ckpt_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

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

}  // namespace

TEST_CASE("save, load, re-save is byte-identical") {
  const fs::path dir = temp_dir("resave");
  const ModelConfig cfg = small_config();
  Rng rng(1);
  ParamStore params = init_model_params(cfg, rng);

  CheckpointMeta meta;
  meta.config = cfg;
  meta.step = 42;
  meta.adam_t = 42;
  meta.rng = Rng(9).state();
  meta.has_opt = false;

  save_checkpoint(params, meta, (dir / "a.ck").string());
  auto [loaded, loaded_meta] = load_checkpoint((dir / "a.ck").string());
  CHECK(loaded_meta.step == 42);
  CHECK(loaded_meta.config == cfg);
  CHECK(loaded_meta.rng == meta.rng);
  save_checkpoint(loaded, loaded_meta, (dir / "b.ck").string());
  CHECK(slurp(dir / "a.ck") == slurp(dir / "b.ck"));
}

TEST_CASE("optimizer moments survive the roundtrip") {
  const fs::path dir = temp_dir("moments");
  const ModelConfig cfg = small_config();
  Rng rng(2);
  ParamStore params = init_model_params(cfg, rng);
  for (const auto& name : params.names()) {
    params.opt_m(name).setConstant(0.25);
    params.opt_v(name).setConstant(0.5);
  }
  CheckpointMeta meta;
  meta.config = cfg;
  meta.has_opt = true;
  save_checkpoint(params, meta, (dir / "opt.ck").string());
  auto [loaded, loaded_meta] = load_checkpoint((dir / "opt.ck").string());
  CHECK(loaded_meta.has_opt);
  CHECK(loaded.opt_m("ctx.emb").isConstant(0.25, 0.0));
  CHECK(loaded.opt_v("hesd.x.w1").isConstant(0.5, 0.0));
}

TEST_CASE("config mismatch is an explicit error") {
  const fs::path dir = temp_dir("mismatch");
  const ModelConfig cfg = small_config();
  Rng rng(3);
  ParamStore params = init_model_params(cfg, rng);
  CheckpointMeta meta;
  meta.config = cfg;
  save_checkpoint(params, meta, (dir / "c.ck").string());

  ModelConfig other = cfg;
  other.d_ctx = 32;
  CHECK_THROWS_WITH_AS(load_checkpoint((dir / "c.ck").string(), other),
                       doctest::Contains("d_ctx"), ConfigMismatchError);
  CHECK_NOTHROW(load_checkpoint((dir / "c.ck").string(), cfg));
}

TEST_CASE("corrupt files are rejected") {
  const fs::path dir = temp_dir("corrupt");

  SUBCASE("bad magic") {
    std::ofstream out(dir / "bad.ck", std::ios::binary);
    out << "NOTACKPT and some garbage";
    out.close();
    CHECK_THROWS_WITH_AS(load_checkpoint((dir / "bad.ck").string()),
                         doctest::Contains("magic"), std::runtime_error);
  }

  SUBCASE("truncated tensor data") {
    const ModelConfig cfg = small_config();
    Rng rng(4);
    ParamStore params = init_model_params(cfg, rng);
    CheckpointMeta meta;
    meta.config = cfg;
    save_checkpoint(params, meta, (dir / "full.ck").string());
    const std::string full = slurp(dir / "full.ck");
    std::ofstream out(dir / "cut.ck", std::ios::binary);
    out.write(full.data(), static_cast<std::streamsize>(full.size() / 2));
    out.close();
    CHECK_THROWS_WITH_AS(load_checkpoint((dir / "cut.ck").string()),
                         doctest::Contains("truncated"), std::runtime_error);
  }

  SUBCASE("missing file") {
    CHECK_THROWS(load_checkpoint((dir / "absent.ck").string()));
  }
}

TEST_CASE("inference is bitwise identical across a checkpoint roundtrip") {
  const fs::path dir = temp_dir("inference");
  const ModelConfig cfg = small_config();
  Rng rng(5);
  ParamStore params = init_model_params(cfg, rng);

  SyntheticConfig dcfg;
  dcfg.n_trials = 3;
  dcfg.seed = 17;
  const std::vector<Trial> trials = generate(dcfg);

  CheckpointMeta meta;
  meta.config = cfg;
  save_checkpoint(params, meta, (dir / "m.ck").string());
  auto [loaded, loaded_meta] = load_checkpoint((dir / "m.ck").string());

  for (const Trial& t : trials) {
    const Scanpath before =
        predict_scanpath(t.image, t.expression, params, cfg);
    const Scanpath after =
        predict_scanpath(t.image, t.expression, loaded, loaded_meta.config);
    CHECK(before == after);
  }
}
