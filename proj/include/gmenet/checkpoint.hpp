#pragma once

#include <cstdint>
#include <string>

#include "gmenet/param_store.hpp"
#include "gmenet/types.hpp"

namespace gmenet {

// Sidecar metadata stored as a JSON header in front of the parameter blocks.
// `kind` is "cggm" for pretraining artifacts and "model" for full networks;
// the split fields are only meaningful for the latter.
struct CheckpointHeader {
  std::string kind;
  int schema_version = 1;
  Index raw_dim = 0;
  Index d_model = 0;
  Index tokens = 0;
  Index heads = 0;
  Index d_expert = 0;
  std::uint64_t init_seed = 0;
  std::string variant;  // full | no_cggm | no_dwefm
  std::string mode;     // fs | ms
  std::uint64_t split_seed = 0;
  int fold = -1;
  int n_folds = 5;
  double test_frac = 0.2;
  std::string independent_center = "BRATS";
};

// Writes every parameter whose name starts with `prefix` (all of them when
// empty) as raw doubles. Loading back is bit-exact.
void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const ParamStore& ps, const std::string& prefix = "");

CheckpointHeader read_checkpoint_header(const std::string& path);

// Copies blocks into already-created parameters. The block set must match the
// store's `prefix` group exactly, names and shapes both.
CheckpointHeader load_checkpoint(const std::string& path, ParamStore& ps,
                                 const std::string& prefix = "");

}  // namespace gmenet
