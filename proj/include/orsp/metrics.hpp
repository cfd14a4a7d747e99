#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "orsp/types.hpp"

namespace orsp {

using Matrix = Eigen::MatrixXd;

/// Cell labels, one per fixation, over a fixed spatial grid.
using ClusterString = std::vector<int>;

struct MetricsConfig {
  int grid_x = 8;        // cluster grid for SS / FED
  int grid_y = 6;
  int sal_x = 65;        // saliency grid (8 px cells at 520x312)
  int sal_y = 39;
  double sigma_px = 16.0;

  friend bool operator==(const MetricsConfig&, const MetricsConfig&) = default;
};

struct SaliencyMap {
  Matrix grid;  // [G_y, G_x], nonnegative
  double sigma_px = 0.0;
};

struct TrialMetrics {
  std::string trial_id;
  double ss = 0.0, ss_pack = 0.0;
  double fed = 0.0, fed_pack = 0.0;
  double cc_pack = 0.0, nss_pack = 0.0;
  bool has_cc = false, has_nss = false;  // at least one nonempty GT pack
};

struct MetricsReport {
  double ss = 0.0, ss_pack = 0.0;
  double fed = 0.0, fed_pack = 0.0;
  double cc_pack = 0.0, nss_pack = 0.0;
  int n_trials = 0;
  std::vector<TrialMetrics> per_trial;
};

/// Cell label floor(x*gx) + gx*floor(y*gy); x = 1 or y = 1 clamps into the
/// last cell.
ClusterString quantize(const FixationPack& fixations, int gx, int gy);
ClusterString quantize(const Scanpath& scanpath, int gx, int gy);

/// Levenshtein distance with unit insert/delete/substitute costs.
int edit_distance(const ClusterString& a, const ClusterString& b);

/// 1 - ED/max(|a|,|b|); both empty -> 1, exactly one empty -> 0.
double sequence_score(const ClusterString& a, const ClusterString& b);

/// Unit impulse per fixation at its cell center, convolved with an
/// isotropic Gaussian of sigma_px truncated at 3 sigma. Empty pack gives
/// the zero map. Additive in fixations.
SaliencyMap saliency_map(const FixationPack& fixations, double sigma_px,
                         int gx, int gy);

/// Pearson correlation over cells; zero variance on either side -> 0.
double cc(const SaliencyMap& a, const SaliencyMap& b);

/// Mean z-scored predicted-map value at the cells holding each ground-truth
/// fixation; a zero-variance map z-scores to all zeros.
double nss(const SaliencyMap& pred, const FixationPack& gt_fixations, int gx,
           int gy);

/// Whole-scanpath SS/FED plus index-aligned per-pack metrics averaged over
/// packs then trials. CC/NSS skip packs with empty ground truth. Throws on
/// per-trial pack-count mismatch.
MetricsReport evaluate(const std::vector<Scanpath>& preds,
                       const std::vector<Scanpath>& gts,
                       const MetricsConfig& cfg,
                       const std::vector<std::string>* trial_ids = nullptr,
                       int threads = 1);

/// Fixed-width table with the six metric columns; one row per entry.
std::string metrics_table(
    const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace orsp
