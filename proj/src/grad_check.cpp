#include "orsp/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>

#include "orsp/rng.hpp"

namespace orsp {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

namespace {

double eval_loss(const LossBuilder& build, ParamStore& store) {
  Tape tape(/*recording=*/false);
  Var loss = build(tape, store);
  return tape.value(loss)(0, 0);
}

std::uint64_t name_hash(const std::string& s) {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<Eigen::Index> pick_elements(Eigen::Index size, int max_per_tensor,
                                        std::uint64_t seed) {
  std::vector<Eigen::Index> idx;
  if (max_per_tensor <= 0 || size <= max_per_tensor) {
    idx.resize(static_cast<std::size_t>(size));
    for (Eigen::Index i = 0; i < size; ++i) idx[static_cast<std::size_t>(i)] = i;
    return idx;
  }
  Rng rng(seed);
  std::set<Eigen::Index> chosen;
  while (static_cast<int>(chosen.size()) < max_per_tensor)
    chosen.insert(static_cast<Eigen::Index>(rng.next_u64() %
                                            static_cast<std::uint64_t>(size)));
  idx.assign(chosen.begin(), chosen.end());
  return idx;
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& build, ParamStore& store,
                           double eps, int max_per_tensor,
                           std::uint64_t sample_seed) {
  const double probe1 = eval_loss(build, store);
  const double probe2 = eval_loss(build, store);
  if (std::memcmp(&probe1, &probe2, sizeof(double)) != 0)
    throw std::runtime_error(
        "grad_check: loss builder is not deterministic (two forward passes "
        "disagree)");

  store.zero_grads();
  {
    Tape tape;
    Var loss = build(tape, store);
    tape.backward(loss, store);
  }

  GradCheckReport report;
  for (const std::string& name : store.names()) {
    Matrix& v = store.value(name);
    const Matrix& analytic = store.grad(name);
    GradCheckEntry entry;
    entry.name = name;

    const auto elements =
        pick_elements(v.size(), max_per_tensor, sample_seed ^ name_hash(name));
    for (Eigen::Index flat : elements) {
      double* p = v.data() + flat;
      const double saved = *p;
      *p = saved + eps;
      const double f_plus = eval_loss(build, store);
      *p = saved - eps;
      const double f_minus = eval_loss(build, store);
      *p = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double err = rel_err(*(analytic.data() + flat), numeric);
      entry.max_rel_err = std::max(entry.max_rel_err, err);
      ++entry.elements_checked;
    }

    if (entry.max_rel_err > report.worst) {
      report.worst = entry.max_rel_err;
      report.worst_name = name;
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace orsp
