#include "orsp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

namespace orsp {

namespace {

int cell_of(double coord, int cells) {
  int c = static_cast<int>(std::floor(coord * cells));
  return std::clamp(c, 0, cells - 1);
}

}  // namespace

ClusterString quantize(const FixationPack& fixations, int gx, int gy) {
  ClusterString labels;
  labels.reserve(fixations.size());
  for (const Fixation& f : fixations)
    labels.push_back(cell_of(f.x, gx) + gx * cell_of(f.y, gy));
  return labels;
}

ClusterString quantize(const Scanpath& scanpath, int gx, int gy) {
  FixationPack all;
  all.reserve(scanpath.total_fixations());
  for (const auto& p : scanpath.packs) all.insert(all.end(), p.begin(), p.end());
  return quantize(all, gx, gy);
}

int edit_distance(const ClusterString& a, const ClusterString& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double sequence_score(const ClusterString& a, const ClusterString& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  const double longest = static_cast<double>(std::max(a.size(), b.size()));
  return 1.0 - edit_distance(a, b) / longest;
}

SaliencyMap saliency_map(const FixationPack& fixations, double sigma_px,
                         int gx, int gy) {
  if (sigma_px <= 0.0)
    throw std::invalid_argument("saliency_map: sigma_px must be > 0");
  SaliencyMap map;
  map.sigma_px = sigma_px;
  map.grid = Matrix::Zero(gy, gx);
  if (fixations.empty()) return map;

  Matrix impulses = Matrix::Zero(gy, gx);
  for (const Fixation& f : fixations)
    impulses(cell_of(f.y, gy), cell_of(f.x, gx)) += 1.0;

  // Separable Gaussian over cell centers, in cell units.
  const double cell_w = static_cast<double>(kImageWidth) / gx;
  const double cell_h = static_cast<double>(kImageHeight) / gy;
  auto kernel = [sigma_px](double cell_size) {
    const double sigma_cells = sigma_px / cell_size;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma_cells));
    std::vector<double> k(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i)
      k[i + radius] = std::exp(-0.5 * (i * i) / (sigma_cells * sigma_cells));
    return k;
  };
  const std::vector<double> kx = kernel(cell_w);
  const std::vector<double> ky = kernel(cell_h);
  const int rx = (static_cast<int>(kx.size()) - 1) / 2;
  const int ry = (static_cast<int>(ky.size()) - 1) / 2;

  Matrix horiz = Matrix::Zero(gy, gx);
  for (int y = 0; y < gy; ++y)
    for (int x = 0; x < gx; ++x) {
      const double v = impulses(y, x);
      if (v == 0.0) continue;
      for (int dx = -rx; dx <= rx; ++dx) {
        const int tx = x + dx;
        if (tx >= 0 && tx < gx) horiz(y, tx) += v * kx[dx + rx];
      }
    }
  for (int y = 0; y < gy; ++y)
    for (int x = 0; x < gx; ++x) {
      const double v = horiz(y, x);
      if (v == 0.0) continue;
      for (int dy = -ry; dy <= ry; ++dy) {
        const int ty = y + dy;
        if (ty >= 0 && ty < gy) map.grid(ty, x) += v * ky[dy + ry];
      }
    }
  return map;
}

namespace {

bool is_flat(const Matrix& grid) {
  return grid.maxCoeff() == grid.minCoeff();
}

}  // namespace

double cc(const SaliencyMap& a, const SaliencyMap& b) {
  if (a.grid.rows() != b.grid.rows() || a.grid.cols() != b.grid.cols())
    throw std::invalid_argument("cc: grid dims differ");
  if (is_flat(a.grid) || is_flat(b.grid)) return 0.0;
  const double n = static_cast<double>(a.grid.size());
  const double ma = a.grid.mean(), mb = b.grid.mean();
  const Matrix da = a.grid.array() - ma;
  const Matrix db = b.grid.array() - mb;
  const double va = da.cwiseProduct(da).sum() / n;
  const double vb = db.cwiseProduct(db).sum() / n;
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  const double cov = da.cwiseProduct(db).sum() / n;
  return cov / std::sqrt(va * vb);
}

double nss(const SaliencyMap& pred, const FixationPack& gt_fixations, int gx,
           int gy) {
  if (gt_fixations.empty())
    throw std::invalid_argument("nss: empty ground-truth pack");
  if (is_flat(pred.grid)) return 0.0;
  const double n = static_cast<double>(pred.grid.size());
  const double mu = pred.grid.mean();
  const Matrix centered = pred.grid.array() - mu;
  const double var = centered.cwiseProduct(centered).sum() / n;
  if (var <= 0.0) return 0.0;
  const double sd = std::sqrt(var);
  double acc = 0.0;
  for (const Fixation& f : gt_fixations)
    acc += centered(cell_of(f.y, gy), cell_of(f.x, gx)) / sd;
  return acc / static_cast<double>(gt_fixations.size());
}

namespace {

TrialMetrics eval_trial(const Scanpath& pred, const Scanpath& gt,
                        const MetricsConfig& cfg) {
  TrialMetrics tm;
  tm.ss = sequence_score(quantize(pred, cfg.grid_x, cfg.grid_y),
                         quantize(gt, cfg.grid_x, cfg.grid_y));
  tm.fed = edit_distance(quantize(pred, cfg.grid_x, cfg.grid_y),
                         quantize(gt, cfg.grid_x, cfg.grid_y));

  const std::size_t n_packs = gt.packs.size();
  double ss_sum = 0.0, fed_sum = 0.0, cc_sum = 0.0, nss_sum = 0.0;
  int cc_count = 0, nss_count = 0;
  for (std::size_t j = 0; j < n_packs; ++j) {
    const ClusterString pa = quantize(pred.packs[j], cfg.grid_x, cfg.grid_y);
    const ClusterString ga = quantize(gt.packs[j], cfg.grid_x, cfg.grid_y);
    ss_sum += sequence_score(pa, ga);
    fed_sum += edit_distance(pa, ga);
    if (!gt.packs[j].empty()) {
      const SaliencyMap pm =
          saliency_map(pred.packs[j], cfg.sigma_px, cfg.sal_x, cfg.sal_y);
      const SaliencyMap gm =
          saliency_map(gt.packs[j], cfg.sigma_px, cfg.sal_x, cfg.sal_y);
      cc_sum += cc(pm, gm);
      ++cc_count;
      nss_sum += nss(pm, gt.packs[j], cfg.sal_x, cfg.sal_y);
      ++nss_count;
    }
  }
  tm.ss_pack = ss_sum / static_cast<double>(n_packs);
  tm.fed_pack = fed_sum / static_cast<double>(n_packs);
  if (cc_count > 0) {
    tm.cc_pack = cc_sum / cc_count;
    tm.has_cc = true;
  }
  if (nss_count > 0) {
    tm.nss_pack = nss_sum / nss_count;
    tm.has_nss = true;
  }
  return tm;
}

}  // namespace

MetricsReport evaluate(const std::vector<Scanpath>& preds,
                       const std::vector<Scanpath>& gts,
                       const MetricsConfig& cfg,
                       const std::vector<std::string>* trial_ids,
                       int threads) {
  if (preds.size() != gts.size())
    throw std::invalid_argument("evaluate: trial counts differ");
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i].packs.size() != gts[i].packs.size())
      throw std::invalid_argument("evaluate: pack-count mismatch at trial " +
                                  std::to_string(i));

  MetricsReport report;
  report.n_trials = static_cast<int>(preds.size());
  report.per_trial.resize(preds.size());

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      report.per_trial[i] = eval_trial(preds[i], gts[i], cfg);
      if (trial_ids) report.per_trial[i].trial_id = (*trial_ids)[i];
    }
  };
  const int n_threads =
      std::max(1, std::min<int>(threads, static_cast<int>(preds.size())));
  if (n_threads <= 1) {
    work(0, preds.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (preds.size() + n_threads - 1) / n_threads;
    for (int k = 0; k < n_threads; ++k) {
      const std::size_t b = static_cast<std::size_t>(k) * chunk;
      const std::size_t e = std::min(preds.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  // Fixed-order reduction so the aggregate is thread-count independent.
  int cc_trials = 0, nss_trials = 0;
  for (const TrialMetrics& tm : report.per_trial) {
    report.ss += tm.ss;
    report.ss_pack += tm.ss_pack;
    report.fed += tm.fed;
    report.fed_pack += tm.fed_pack;
    if (tm.has_cc) {
      report.cc_pack += tm.cc_pack;
      ++cc_trials;
    }
    if (tm.has_nss) {
      report.nss_pack += tm.nss_pack;
      ++nss_trials;
    }
  }
  if (report.n_trials > 0) {
    report.ss /= report.n_trials;
    report.ss_pack /= report.n_trials;
    report.fed /= report.n_trials;
    report.fed_pack /= report.n_trials;
  }
  if (cc_trials > 0) report.cc_pack /= cc_trials;
  if (nss_trials > 0) report.nss_pack /= nss_trials;
  return report;
}

std::string metrics_table(
    const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::string out;
  std::size_t name_w = 6;
  for (const auto& [name, r] : rows) name_w = std::max(name_w, name.size());
  char line[256];
  std::snprintf(line, sizeof(line), "%-*s %8s %8s %8s %8s %8s %8s\n",
                static_cast<int>(name_w), "config", "SS", "SSpack", "FED",
                "FEDpack", "CCpack", "NSSpack");
  out += line;
  for (const auto& [name, r] : rows) {
    std::snprintf(line, sizeof(line),
                  "%-*s %8.3f %8.3f %8.3f %8.3f %8.3f %8.3f\n",
                  static_cast<int>(name_w), name.c_str(), r.ss, r.ss_pack,
                  r.fed, r.fed_pack, r.cc_pack, r.nss_pack);
    out += line;
  }
  return out;
}

}  // namespace orsp
