#pragma once

#include <string>

#include "orsp/param_store.hpp"
#include "orsp/rng.hpp"
#include "orsp/types.hpp"

namespace orsp {

struct ConfigMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
  ModelConfig config;
  long step = 0;    // optimizer steps taken
  long adam_t = 0;  // Adam bias-correction counter
  Rng::State rng{};
  bool has_opt = false;
};

/// Canonical binary layout: magic, a sorted-key JSON header listing every
/// tensor's name and shape, then raw little-endian doubles in sorted name
/// order (values, then moments if present). Reload then re-save is
/// byte-identical.
void save_checkpoint(const ParamStore& params, const CheckpointMeta& meta,
                     const std::string& path);

std::pair<ParamStore, CheckpointMeta> load_checkpoint(const std::string& path);

/// Loads and verifies the stored ModelConfig equals `expected`; throws
/// ConfigMismatchError naming the first differing field otherwise.
std::pair<ParamStore, CheckpointMeta> load_checkpoint(
    const std::string& path, const ModelConfig& expected);

}  // namespace orsp
