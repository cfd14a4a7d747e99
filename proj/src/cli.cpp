#include "orsp/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "orsp/checkpoint.hpp"
#include "orsp/dataset.hpp"
#include "orsp/grad_check.hpp"
#include "orsp/metrics.hpp"
#include "orsp/render.hpp"
#include "orsp/serde.hpp"
#include "orsp/trainer.hpp"

namespace orsp {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitCheckFailed = 3;

struct ModelFlags {
  int lp = 4;
  double threshold = 0.5;
  double gamma = 2.0;
  double alpha = 0.25;
  int d_ctx = 128, d_hist = 64, d_mlp = 128, d_img = 64, d_emb = 64;
  std::string ablation = "full";
};

void add_model_flags(CLI::App* app, ModelFlags& f) {
  app->add_option("--lp", f.lp, "max fixations per pack");
  app->add_option("--threshold", f.threshold, "validity decode threshold");
  app->add_option("--gamma", f.gamma, "focal loss gamma");
  app->add_option("--alpha", f.alpha, "focal loss alpha");
  app->add_option("--d-ctx", f.d_ctx, "context state width");
  app->add_option("--d-hist", f.d_hist, "history state width");
  app->add_option("--d-mlp", f.d_mlp, "head hidden width");
  app->add_option("--d-img", f.d_img, "image feature width");
  app->add_option("--d-emb", f.d_emb, "token embedding width");
  app->add_option("--ablation", f.ablation, "model variant")
      ->check(CLI::IsMember(
          {"full", "no_hesd", "no_txt_loss", "l2_xy", "early_fusion"}));
}

AblationFlags ablation_from_name(const std::string& name) {
  AblationFlags a;
  if (name == "no_hesd") a.no_hesd = true;
  else if (name == "no_txt_loss") a.no_txt_loss = true;
  else if (name == "l2_xy") a.use_l2_xy = true;
  else if (name == "early_fusion") a.early_fusion = true;
  return a;
}

ModelConfig model_config_from(const ModelFlags& f) {
  ModelConfig cfg;
  cfg.l_p = f.lp;
  cfg.decode_threshold = f.threshold;
  cfg.focal_gamma = f.gamma;
  cfg.focal_alpha = f.alpha;
  cfg.d_ctx = f.d_ctx;
  cfg.d_hist = f.d_hist;
  cfg.d_mlp = f.d_mlp;
  cfg.d_img = f.d_img;
  cfg.d_emb = f.d_emb;
  cfg.vocab_size = default_vocab().size();
  cfg.ablation = ablation_from_name(f.ablation);
  return cfg;
}

void echo_config(const std::string& command, const json& resolved) {
  json j;
  j["command"] = command;
  j["resolved"] = resolved;
  std::cout << j.dump() << "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string format_csv(const std::vector<StepLog>& steps) {
  std::string csv = "epoch,step,l_txt,l_xy,l_token,l_total,lr\n";
  char line[256];
  for (const StepLog& s : steps) {
    std::snprintf(line, sizeof(line),
                  "%d,%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.epoch, s.step,
                  s.loss.l_txt, s.loss.l_xy, s.loss.l_token, s.loss.l_total,
                  s.lr);
    csv += line;
  }
  return csv;
}

std::vector<Scanpath> preds_for_trials(
    const std::vector<Trial>& trials,
    const std::vector<std::pair<std::string, Scanpath>>& loaded) {
  std::map<std::string, const Scanpath*> by_id;
  for (const auto& [id, sp] : loaded) by_id[id] = &sp;
  std::vector<Scanpath> out;
  out.reserve(trials.size());
  for (const Trial& t : trials) {
    auto it = by_id.find(t.trial_id);
    if (it == by_id.end())
      throw std::runtime_error("predictions missing trial " + t.trial_id);
    out.push_back(*it->second);
  }
  return out;
}

void write_report(const MetricsReport& report, const std::string& json_path,
                  const std::string& table_path, const std::string& row_name) {
  if (!json_path.empty()) {
    json j = report;
    write_text_file(json_path, j.dump(2) + "\n");
  }
  const std::string table = metrics_table({{row_name, report}});
  std::cout << table;
  if (!table_path.empty()) write_text_file(table_path, table);
}

// ---- subcommands -----------------------------------------------------------

struct GenDataArgs {
  std::string out;
  std::string split_prefix;
  std::uint64_t seed = 0;
  int trials = 100;
  int min_objects = 3, max_objects = 5;
  double sigma_fix = 0.015;
  std::string image_mode = "inline";
};

int run_gen_data(const GenDataArgs& a) {
  SyntheticConfig cfg;
  cfg.n_trials = a.trials;
  cfg.seed = a.seed;
  cfg.min_objects = a.min_objects;
  cfg.max_objects = a.max_objects;
  cfg.sigma_fix = a.sigma_fix;
  echo_config("gen-data", {{"out", a.out},
                           {"seed", a.seed},
                           {"trials", a.trials},
                           {"min_objects", a.min_objects},
                           {"max_objects", a.max_objects},
                           {"sigma_fix", a.sigma_fix},
                           {"image_mode", a.image_mode},
                           {"split_prefix", a.split_prefix}});
  const ImageMode mode =
      a.image_mode == "ref" ? ImageMode::kExternalRef : ImageMode::kInline;
  std::vector<Trial> trials = generate(cfg);
  if (!a.out.empty()) save_jsonl(trials, a.out, mode);
  if (!a.split_prefix.empty()) {
    DatasetSplit split = split_dataset(std::move(trials), a.seed);
    save_jsonl(split.train, a.split_prefix + ".train.jsonl", mode);
    save_jsonl(split.val, a.split_prefix + ".val.jsonl", mode);
    save_jsonl(split.test, a.split_prefix + ".test.jsonl", mode);
  }
  return kExitOk;
}

struct TrainArgs {
  std::string data, val_data, out, log_csv;
  ModelFlags model;
  TrainConfig tcfg;
};

int run_train(const TrainArgs& a) {
  const ModelConfig mcfg = model_config_from(a.model);
  echo_config("train", {{"data", a.data},
                        {"val_data", a.val_data},
                        {"out", a.out},
                        {"log_csv", a.log_csv},
                        {"model", mcfg},
                        {"train", a.tcfg}});
  const Vocab vocab = default_vocab();
  const std::vector<Trial> train_set = load_jsonl(a.data, vocab);
  std::vector<Trial> val_set;
  if (!a.val_data.empty()) val_set = load_jsonl(a.val_data, vocab);

  TrainResult result = train(train_set, val_set.empty() ? nullptr : &val_set,
                             mcfg, a.tcfg);

  CheckpointMeta meta;
  meta.config = mcfg;
  meta.step = result.optimizer_steps;
  meta.adam_t = result.adam_t;
  meta.rng = result.rng_state;
  meta.has_opt = true;
  save_checkpoint(result.params, meta, a.out);

  const std::string csv_path =
      a.log_csv.empty() ? a.out + ".losses.csv" : a.log_csv;
  write_text_file(csv_path, format_csv(result.steps));

  for (std::size_t e = 0; e < result.epoch_val.size(); ++e) {
    const LossBreakdown& bd = result.epoch_val[e];
    std::printf("epoch %zu val: l_txt %.6f l_xy %.6f l_token %.6f total %.6f\n",
                e, bd.l_txt, bd.l_xy, bd.l_token, bd.l_total);
  }
  return kExitOk;
}

struct EvalArgs {
  std::string data, ckpt, preds, out, table;
  std::vector<int> grid;
  double sigma_px = 16.0;
  int threads = 1;
};

int run_eval(const EvalArgs& a) {
  MetricsConfig mc;
  if (!a.grid.empty()) {
    mc.grid_x = a.grid[0];
    mc.grid_y = a.grid[1];
  }
  mc.sigma_px = a.sigma_px;
  echo_config("eval", {{"data", a.data},
                       {"ckpt", a.ckpt},
                       {"preds", a.preds},
                       {"out", a.out},
                       {"metrics", mc},
                       {"threads", a.threads}});
  const std::vector<Trial> trials = load_jsonl(a.data, default_vocab());

  std::vector<Scanpath> preds;
  if (!a.ckpt.empty()) {
    auto [params, meta] = load_checkpoint(a.ckpt);
    preds = predict_scanpaths(trials, params, meta.config, a.threads);
  } else if (!a.preds.empty()) {
    preds = preds_for_trials(trials, load_scanpaths_jsonl(a.preds));
  } else {
    throw CLI::ValidationError("eval", "one of --ckpt or --preds is required");
  }

  std::vector<Scanpath> gts;
  std::vector<std::string> ids;
  gts.reserve(trials.size());
  for (const Trial& t : trials) {
    gts.push_back(t.gt_scanpath);
    ids.push_back(t.trial_id);
  }
  const MetricsReport report = evaluate(preds, gts, mc, &ids, a.threads);
  write_report(report, a.out, a.table, a.ckpt.empty() ? "preds" : "model");
  return kExitOk;
}

struct PredictArgs {
  std::string data, ckpt, out;
  int threads = 1;
};

int run_predict(const PredictArgs& a) {
  echo_config("predict", {{"data", a.data},
                          {"ckpt", a.ckpt},
                          {"out", a.out},
                          {"threads", a.threads}});
  const std::vector<Trial> trials = load_jsonl(a.data, default_vocab());
  auto [params, meta] = load_checkpoint(a.ckpt);
  const std::vector<Scanpath> preds =
      predict_scanpaths(trials, params, meta.config, a.threads);
  std::vector<std::string> ids;
  for (const Trial& t : trials) ids.push_back(t.trial_id);
  save_scanpaths_jsonl(ids, preds, a.out);
  return kExitOk;
}

struct RenderArgs {
  std::string data, ckpt, preds, out;
  int index = 0;
};

int run_render(const RenderArgs& a) {
  echo_config("render", {{"data", a.data},
                         {"ckpt", a.ckpt},
                         {"preds", a.preds},
                         {"out", a.out},
                         {"index", a.index}});
  const std::vector<Trial> trials = load_jsonl(a.data, default_vocab());
  if (a.index < 0 || a.index >= static_cast<int>(trials.size()))
    throw std::runtime_error("render: trial index out of range");
  const Trial& trial = trials[static_cast<std::size_t>(a.index)];

  Scanpath pred;
  if (!a.ckpt.empty()) {
    auto [params, meta] = load_checkpoint(a.ckpt);
    pred = predict_scanpath(trial.image, trial.expression, params, meta.config);
  } else if (!a.preds.empty()) {
    pred = preds_for_trials({trial}, load_scanpaths_jsonl(a.preds)).front();
  }
  render_svg_file(trial, pred, trial.gt_scanpath, a.out);
  return kExitOk;
}

struct AblateArgs {
  std::string data, eval_data, out_dir;
  ModelFlags model;
  TrainConfig tcfg;
  MetricsConfig mcfg;
  int threads = 1;
};

int run_ablate(const AblateArgs& a) {
  echo_config("ablate", {{"data", a.data},
                         {"eval_data", a.eval_data},
                         {"out", a.out_dir},
                         {"train", a.tcfg},
                         {"metrics", a.mcfg},
                         {"threads", a.threads}});
  fs::create_directories(a.out_dir);
  const Vocab vocab = default_vocab();
  const std::vector<Trial> train_set = load_jsonl(a.data, vocab);
  const std::vector<Trial> eval_set = load_jsonl(a.eval_data, vocab);

  std::vector<Scanpath> gts;
  std::vector<std::string> ids;
  for (const Trial& t : eval_set) {
    gts.push_back(t.gt_scanpath);
    ids.push_back(t.trial_id);
  }

  const std::vector<std::string> variants = {"full", "no_hesd", "no_txt_loss",
                                             "l2_xy", "early_fusion"};
  std::vector<std::pair<std::string, MetricsReport>> rows;
  for (const std::string& variant : variants) {
    try {
      ModelFlags mf = a.model;
      mf.ablation = variant;
      const ModelConfig mcfg = model_config_from(mf);
      TrainResult result = train(train_set, nullptr, mcfg, a.tcfg);

      CheckpointMeta meta;
      meta.config = mcfg;
      meta.step = result.optimizer_steps;
      meta.adam_t = result.adam_t;
      meta.rng = result.rng_state;
      meta.has_opt = false;
      save_checkpoint(result.params,
                      meta, a.out_dir + "/ckpt_" + variant + ".orspck");

      const std::vector<Scanpath> preds =
          predict_scanpaths(eval_set, result.params, mcfg, a.threads);
      const MetricsReport report = evaluate(preds, gts, a.mcfg, &ids, a.threads);
      json j = report;
      write_text_file(a.out_dir + "/report_" + variant + ".json",
                      j.dump(2) + "\n");
      rows.emplace_back(variant, report);
    } catch (const std::exception& e) {
      throw std::runtime_error("ablation config '" + variant +
                               "' failed: " + e.what());
    }
  }

  std::string table = metrics_table(rows);
  table += "\ninformational deltas vs full (positive = full higher):\n";
  const MetricsReport& full = rows.front().second;
  char line[256];
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const MetricsReport& r = rows[i].second;
    std::snprintf(line, sizeof(line),
                  "  full - %-14s dSS %+0.3f dSSpack %+0.3f dFED %+0.3f "
                  "dFEDpack %+0.3f dCCpack %+0.3f dNSSpack %+0.3f\n",
                  rows[i].first.c_str(), full.ss - r.ss,
                  full.ss_pack - r.ss_pack, full.fed - r.fed,
                  full.fed_pack - r.fed_pack, full.cc_pack - r.cc_pack,
                  full.nss_pack - r.nss_pack);
    table += line;
  }
  std::cout << table;
  write_text_file(a.out_dir + "/ablation_table.txt", table);
  return kExitOk;
}

struct GradCheckArgs {
  std::uint64_t seed = 0;
  double eps = 1e-4;
  double tol = 1e-4;
  int sample = 64;
};

int run_grad_check(const GradCheckArgs& a) {
  echo_config("grad-check", {{"seed", a.seed},
                             {"eps", a.eps},
                             {"tol", a.tol},
                             {"sample", a.sample}});
  SyntheticConfig dcfg;
  dcfg.n_trials = 1;
  dcfg.seed = a.seed;
  const Trial trial = generate(dcfg).front();

  ModelConfig base;
  base.d_ctx = 32;
  base.d_hist = 16;
  base.d_mlp = 32;
  base.d_img = 16;
  base.d_emb = 16;
  base.vocab_size = 32;

  const std::vector<std::string> variants = {"full", "no_hesd", "early_fusion",
                                             "l2_xy"};
  bool ok = true;
  for (const std::string& variant : variants) {
    ModelConfig cfg = base;
    cfg.ablation = ablation_from_name(variant);
    Rng rng(a.seed);
    ParamStore store = init_model_params(cfg, rng);
    auto build = [&trial, &cfg](Tape& tape, ParamStore& s) {
      ModelVars m = bind_model(tape, s, cfg);
      TeacherForcedOut fwd = forward_teacher_forced(tape, m, trial, cfg);
      return build_losses(tape, m, fwd, trial, cfg).total;
    };
    const GradCheckReport report =
        grad_check(build, store, a.eps, a.sample, a.seed);
    std::printf("[%s] worst %.3e (%s)\n", variant.c_str(), report.worst,
                report.worst_name.c_str());
    for (const GradCheckEntry& e : report.entries)
      std::printf("  %-16s checked %4d  max rel err %.3e\n", e.name.c_str(),
                  e.elements_checked, e.max_rel_err);
    if (!report.all_below(a.tol)) ok = false;
  }
  std::printf("grad-check %s (tol %.1e)\n", ok ? "PASS" : "FAIL", a.tol);
  return ok ? kExitOk : kExitCheckFailed;
}

void add_train_flags(CLI::App* cmd, TrainConfig& tcfg) {
  cmd->add_option("--epochs", tcfg.epochs, "training epochs");
  cmd->add_option("--lr0", tcfg.lr0, "peak learning rate");
  cmd->add_option("--lr-min", tcfg.lr_min, "final learning rate");
  cmd->add_option("--warmup-frac", tcfg.warmup_frac,
                  "warmup fraction of total steps");
  cmd->add_option("--grad-accum", tcfg.grad_accum, "gradient accumulation");
  cmd->add_option("--batch-size", tcfg.batch_size, "trials per micro-batch");
  cmd->add_option("--weight-decay", tcfg.weight_decay, "decoupled decay");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"incremental referring-expression scanpath model"};
  app.require_subcommand(1);

  GenDataArgs gen;
  CLI::App* cmd_gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  cmd_gen->add_option("--out", gen.out, "output JSONL path");
  cmd_gen->add_option("--split-prefix", gen.split_prefix,
                      "write <prefix>.{train,val,test}.jsonl");
  cmd_gen->add_option("--seed", gen.seed, "RNG seed")->required();
  cmd_gen->add_option("--trials", gen.trials, "number of trials");
  cmd_gen->add_option("--min-objects", gen.min_objects, "objects per scene, min");
  cmd_gen->add_option("--max-objects", gen.max_objects, "objects per scene, max");
  cmd_gen->add_option("--sigma-fix", gen.sigma_fix, "fixation noise");
  cmd_gen->add_option("--image-mode", gen.image_mode, "inline or ref")
      ->check(CLI::IsMember({"inline", "ref"}));

  TrainArgs tr;
  CLI::App* cmd_train = app.add_subcommand("train", "train a model");
  cmd_train->add_option("--data", tr.data, "training JSONL")->required();
  cmd_train->add_option("--val-data", tr.val_data, "validation JSONL");
  cmd_train->add_option("--out", tr.out, "checkpoint path")->required();
  cmd_train->add_option("--log-csv", tr.log_csv, "loss log path");
  cmd_train->add_option("--seed", tr.tcfg.seed, "RNG seed")->required();
  add_train_flags(cmd_train, tr.tcfg);
  add_model_flags(cmd_train, tr.model);

  EvalArgs ev;
  CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate predictions");
  cmd_eval->add_option("--data", ev.data, "dataset JSONL")->required();
  cmd_eval->add_option("--ckpt", ev.ckpt, "checkpoint to run");
  cmd_eval->add_option("--preds", ev.preds, "predicted scanpaths JSONL");
  cmd_eval->add_option("--out", ev.out, "report JSON path");
  cmd_eval->add_option("--table", ev.table, "table text path");
  cmd_eval->add_option("--grid", ev.grid, "cluster grid GX GY")->expected(2);
  cmd_eval->add_option("--sigma-px", ev.sigma_px, "saliency sigma in px");
  cmd_eval->add_option("--threads", ev.threads, "worker threads");

  PredictArgs pr;
  CLI::App* cmd_predict = app.add_subcommand("predict", "write predicted scanpaths");
  cmd_predict->add_option("--data", pr.data, "dataset JSONL")->required();
  cmd_predict->add_option("--ckpt", pr.ckpt, "checkpoint")->required();
  cmd_predict->add_option("--out", pr.out, "output JSONL")->required();
  cmd_predict->add_option("--threads", pr.threads, "worker threads");

  RenderArgs rd;
  CLI::App* cmd_render = app.add_subcommand("render", "render one trial to SVG");
  cmd_render->add_option("--data", rd.data, "dataset JSONL")->required();
  cmd_render->add_option("--ckpt", rd.ckpt, "checkpoint");
  cmd_render->add_option("--preds", rd.preds, "predicted scanpaths JSONL");
  cmd_render->add_option("--index", rd.index, "trial index");
  cmd_render->add_option("--out", rd.out, "SVG path")->required();

  AblateArgs ab;
  CLI::App* cmd_ablate = app.add_subcommand("ablate", "train and evaluate all variants");
  cmd_ablate->add_option("--data", ab.data, "training JSONL")->required();
  cmd_ablate->add_option("--eval-data", ab.eval_data, "evaluation JSONL")->required();
  cmd_ablate->add_option("--out", ab.out_dir, "output directory")->required();
  cmd_ablate->add_option("--seed", ab.tcfg.seed, "RNG seed")->required();
  cmd_ablate->add_option("--threads", ab.threads, "worker threads");
  cmd_ablate->add_option("--sigma-px", ab.mcfg.sigma_px, "saliency sigma in px");
  add_train_flags(cmd_ablate, ab.tcfg);
  add_model_flags(cmd_ablate, ab.model);

  GradCheckArgs gc;
  CLI::App* cmd_gc = app.add_subcommand("grad-check",
                                        "finite-difference gradient audit");
  cmd_gc->add_option("--seed", gc.seed, "RNG seed")->required();
  cmd_gc->add_option("--eps", gc.eps, "finite-difference step");
  cmd_gc->add_option("--tol", gc.tol, "max relative error allowed");
  cmd_gc->add_option("--sample", gc.sample, "elements checked per tensor");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (cmd_gen->parsed()) return run_gen_data(gen);
    if (cmd_train->parsed()) return run_train(tr);
    if (cmd_eval->parsed()) return run_eval(ev);
    if (cmd_predict->parsed()) return run_predict(pr);
    if (cmd_render->parsed()) return run_render(rd);
    if (cmd_ablate->parsed()) return run_ablate(ab);
    if (cmd_gc->parsed()) return run_grad_check(gc);
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace orsp
