#include "orsp/trainer.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace orsp {

namespace {

void check_finite(const LossBreakdown& l, int epoch, long step) {
  const std::pair<const char*, double> terms[] = {{"l_txt", l.l_txt},
                                                  {"l_xy", l.l_xy},
                                                  {"l_token", l.l_token},
                                                  {"l_total", l.l_total}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "non-finite " << name << " at epoch " << epoch << " step " << step;
      throw std::runtime_error(os.str());
    }
  }
  if (std::abs(l.l_total - (l.l_txt + l.l_xy + l.l_token)) > 1e-12)
    throw std::logic_error("loss total does not equal the sum of its terms");
}

template <typename Fn>
void parallel_over(std::size_t n, int threads, const Fn& fn) {
  const int n_threads =
      std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + n_threads - 1) / n_threads;
  for (int k = 0; k < n_threads; ++k) {
    const std::size_t b = static_cast<std::size_t>(k) * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b < e)
      pool.emplace_back([&fn, b, e] {
        for (std::size_t i = b; i < e; ++i) fn(i);
      });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

TrainResult train(const std::vector<Trial>& train_set,
                  const std::vector<Trial>* val_set, const ModelConfig& mcfg,
                  const TrainConfig& tcfg, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw std::invalid_argument("train: empty dataset");
  const TrainConfig cfg = tcfg.resolved(static_cast<int>(train_set.size()));
  const int batch = std::max(cfg.batch_size, 1);

  Rng rng(cfg.seed);
  TrainResult result;
  result.schedule = cfg;
  result.params = init_model_params(mcfg, rng);
  AdamW opt(cfg);

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  long micro_step = 0;
  int accum_pending = 0;

  auto apply_update = [&] {
    if (accum_pending == 0) return;
    result.params.scale_grads(1.0 / accum_pending);
    opt.step(result.params, lr_at(result.optimizer_steps, cfg));
    result.params.zero_grads();
    accum_pending = 0;
    ++result.optimizer_steps;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t pos = 0; pos < order.size(); pos += batch) {
      const std::size_t end = std::min(order.size(), pos + batch);
      Tape tape;
      ModelVars m = bind_model(tape, result.params, mcfg);
      Var total{};
      LossBreakdown sum_bd;
      for (std::size_t k = pos; k < end; ++k) {
        const Trial& trial = train_set[order[k]];
        TeacherForcedOut fwd = forward_teacher_forced(tape, m, trial, mcfg);
        LossVars l = build_losses(tape, m, fwd, trial, mcfg);
        LossBreakdown bd = read_losses(tape, l);
        sum_bd.l_txt += bd.l_txt;
        sum_bd.l_xy += bd.l_xy;
        sum_bd.l_token += bd.l_token;
        sum_bd.l_total += bd.l_total;
        total = total.valid() ? add(tape, total, l.total) : l.total;
      }
      const double inv = 1.0 / static_cast<double>(end - pos);
      if (end - pos > 1) total = scale(tape, total, inv);
      LossBreakdown bd{sum_bd.l_txt * inv, sum_bd.l_xy * inv,
                       sum_bd.l_token * inv, sum_bd.l_total * inv};
      check_finite(bd, epoch, micro_step);

      tape.backward(total, result.params);
      result.steps.push_back(
          {epoch, micro_step, bd, lr_at(result.optimizer_steps, cfg)});
      ++micro_step;
      if (++accum_pending == cfg.grad_accum) apply_update();
    }

    if (val_set)
      result.epoch_val.push_back(mean_losses(*val_set, result.params, mcfg));
    if (on_epoch && on_epoch(epoch, result.params, result.epoch_val)) break;
  }
  apply_update();

  result.adam_t = opt.t();
  result.rng_state = rng.state();
  return result;
}

LossBreakdown eval_losses_on(const Trial& trial, const ParamStore& params,
                             const ModelConfig& cfg) {
  Tape tape(/*recording=*/false);
  ModelVars m = bind_model(tape, params, cfg);
  TeacherForcedOut fwd = forward_teacher_forced(tape, m, trial, cfg);
  LossVars l = build_losses(tape, m, fwd, trial, cfg);
  return read_losses(tape, l);
}

LossBreakdown mean_losses(const std::vector<Trial>& trials,
                          const ParamStore& params, const ModelConfig& cfg,
                          int threads) {
  if (trials.empty()) return {};
  std::vector<LossBreakdown> per(trials.size());
  parallel_over(trials.size(), threads, [&](std::size_t i) {
    per[i] = eval_losses_on(trials[i], params, cfg);
  });
  LossBreakdown out;
  for (const auto& bd : per) {
    out.l_txt += bd.l_txt;
    out.l_xy += bd.l_xy;
    out.l_token += bd.l_token;
    out.l_total += bd.l_total;
  }
  const double inv = 1.0 / static_cast<double>(trials.size());
  out.l_txt *= inv;
  out.l_xy *= inv;
  out.l_token *= inv;
  out.l_total *= inv;
  return out;
}

double validity_accuracy(const std::vector<Trial>& trials,
                         const ParamStore& params, const ModelConfig& cfg,
                         int threads) {
  if (trials.empty()) return 0.0;
  std::vector<std::pair<long, long>> counts(trials.size());
  parallel_over(trials.size(), threads, [&](std::size_t i) {
    Tape tape(/*recording=*/false);
    ModelVars m = bind_model(tape, params, cfg);
    TeacherForcedOut fwd = forward_teacher_forced(tape, m, trials[i], cfg);
    const Matrix& v = tape.value(fwd.packs.v);
    const EncodedScanpath gt =
        encode_scanpath_targets(trials[i].gt_scanpath, cfg.l_p);
    long hit = 0;
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c) {
        const bool pred = v(r, c) >= cfg.decode_threshold;
        const bool want = gt.mask(r, c) > 0.5;
        if (pred == want) ++hit;
      }
    counts[i] = {hit, v.size()};
  });
  long hits = 0, total = 0;
  for (const auto& [h, n] : counts) {
    hits += h;
    total += n;
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / total;
}

}  // namespace orsp
