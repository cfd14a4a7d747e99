#include "orsp/packcodec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace orsp {

EncodedPack encode_pack(const FixationPack& pack, int l_p) {
  if (l_p < 1) throw std::invalid_argument("encode_pack: l_p must be >= 1");
  EncodedPack out;
  out.coords = Matrix::Zero(l_p, 2);
  out.validity = Matrix::Zero(l_p, 1);
  const int keep = std::min<int>(static_cast<int>(pack.size()), l_p);
  for (int i = 0; i < keep; ++i) {
    const Fixation& f = pack[static_cast<std::size_t>(i)];
    if (!(std::isfinite(f.x) && std::isfinite(f.y) && f.x >= 0.0 &&
          f.x <= 1.0 && f.y >= 0.0 && f.y <= 1.0))
      throw std::out_of_range("encode_pack: fixation coordinate outside [0,1]");
    out.coords(i, 0) = f.x;
    out.coords(i, 1) = f.y;
    out.validity(i, 0) = 1.0;
  }
  return out;
}

FixationPack decode_pack(const Matrix& x, const Matrix& y, const Matrix& v,
                         double threshold) {
  const Eigen::Index n = v.size();
  if (x.size() != n || y.size() != n)
    throw std::invalid_argument("decode_pack: X/Y/V lengths differ");
  FixationPack pack;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (v(i) < threshold) break;
    pack.push_back({x(i), y(i)});
  }
  return pack;
}

FixationPack truncate_pack(const FixationPack& pack, int l_p) {
  const std::size_t keep = std::min(pack.size(), static_cast<std::size_t>(l_p));
  return FixationPack(pack.begin(), pack.begin() + static_cast<long>(keep));
}

EncodedScanpath encode_scanpath_targets(const Scanpath& scanpath, int l_p) {
  const Eigen::Index n = static_cast<Eigen::Index>(scanpath.packs.size());
  EncodedScanpath out;
  out.x = Matrix::Zero(n, l_p);
  out.y = Matrix::Zero(n, l_p);
  out.mask = Matrix::Zero(n, l_p);
  for (Eigen::Index j = 0; j < n; ++j) {
    EncodedPack e = encode_pack(scanpath.packs[static_cast<std::size_t>(j)], l_p);
    out.x.row(j) = e.coords.col(0).transpose();
    out.y.row(j) = e.coords.col(1).transpose();
    out.mask.row(j) = e.validity.transpose();
    out.valid_count += static_cast<int>(e.validity.sum());
  }
  return out;
}

HistoryTensor build_history(const std::vector<FixationPack>& previous_packs,
                            int l_p) {
  Eigen::Index total = 0;
  for (const auto& p : previous_packs) total += static_cast<Eigen::Index>(p.size());

  HistoryTensor history;
  history.rows = Matrix::Zero(total, 4);
  const double pack_norm = 1.0 / (kMaxPackIndex + 1);
  const double order_norm = 1.0 / std::max(l_p - 1, 1);
  Eigen::Index r = 0;
  for (std::size_t j = 0; j < previous_packs.size(); ++j) {
    const double pj =
        std::min<int>(static_cast<int>(j), kMaxPackIndex) * pack_norm;
    for (std::size_t i = 0; i < previous_packs[j].size(); ++i) {
      const Fixation& f = previous_packs[j][i];
      history.rows(r, 0) = f.x;
      history.rows(r, 1) = f.y;
      history.rows(r, 2) = pj;
      history.rows(r, 3) = std::min(static_cast<double>(i) * order_norm, 1.0);
      ++r;
    }
  }
  return history;
}

}  // namespace orsp
