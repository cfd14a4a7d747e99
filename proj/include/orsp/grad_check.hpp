#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "orsp/param_store.hpp"
#include "orsp/tape.hpp"

namespace orsp {

/// |a - b| / max(|a|, |b|, 1e-8); bounded near zero.
double rel_err(double a, double b);

/// Builds a scalar loss from the store's current parameter values. Must be
/// deterministic: grad_check evaluates it repeatedly under perturbations.
using LossBuilder = std::function<Var(Tape&, ParamStore&)>;

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  int elements_checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst = 0.0;
  std::string worst_name;

  bool all_below(double tol) const { return worst < tol; }
};

/// Compares analytic gradients against central finite differences.
/// Tensors larger than `max_per_tensor` elements are checked on a seeded
/// random subsample of that many elements (0 means check everything).
/// Throws if two evaluations of the builder disagree bitwise.
GradCheckReport grad_check(const LossBuilder& build, ParamStore& store,
                           double eps = 1e-4, int max_per_tensor = 0,
                           std::uint64_t sample_seed = 0);

}  // namespace orsp
