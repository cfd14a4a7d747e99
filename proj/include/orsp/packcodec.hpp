#pragma once

#include <Eigen/Dense>

#include <vector>

#include "orsp/types.hpp"

namespace orsp {

using Matrix = Eigen::MatrixXd;

/// Normalizer for the pack-index column of the history tensor; pack
/// indices are clamped to this before dividing by (kMaxPackIndex + 1).
inline constexpr int kMaxPackIndex = 30;

/// Fixed-size pack encoding: the first `valid` slots carry fixations
/// (validity 1), the rest are padding (validity 0, coords exactly (0,0)).
struct EncodedPack {
  Matrix coords;    // [L_p, 2], (x, y) per slot
  Matrix validity;  // [L_p, 1], 1.0 = occupied slot, 0.0 = padding
};

/// One row per historical fixation: (x, y, normalized pack index,
/// normalized intra-pack order), in (pack, order) order.
struct HistoryTensor {
  Matrix rows;  // [L_h, 4]; L_h may be 0

  Eigen::Index count() const { return rows.rows(); }
};

/// Truncates to the first min(|pack|, l_p) fixations and pads the rest.
/// Throws std::out_of_range on a coordinate outside [0,1].
EncodedPack encode_pack(const FixationPack& pack, int l_p);

/// Traverses slots 0..L_p-1 in order, keeping (x_i, y_i) while
/// v_i >= threshold; stops at the first slot below threshold and discards
/// everything after it regardless of later validity values.
FixationPack decode_pack(const Matrix& x, const Matrix& y, const Matrix& v,
                         double threshold);

/// Builds the history tensor from the packs preceding the one being
/// predicted. Pack index is clamped to kMaxPackIndex then divided by
/// (kMaxPackIndex + 1); order is divided by max(l_p - 1, 1) and clamped
/// to 1.
HistoryTensor build_history(const std::vector<FixationPack>& previous_packs,
                            int l_p);

/// First min(|pack|, l_p) fixations; what decoding an exact encoding yields.
FixationPack truncate_pack(const FixationPack& pack, int l_p);

/// Per-pack encodings stacked into [L+2, L_p] coordinate and mask blocks,
/// the layout the training losses consume.
struct EncodedScanpath {
  Matrix x, y;   // [n_packs, L_p]
  Matrix mask;   // [n_packs, L_p], 1.0 on occupied slots
  int valid_count = 0;
};

EncodedScanpath encode_scanpath_targets(const Scanpath& scanpath, int l_p);

}  // namespace orsp
