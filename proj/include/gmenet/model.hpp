#pragma once

#include <cstdint>
#include <string>

#include "gmenet/cggm.hpp"
#include "gmenet/data.hpp"
#include "gmenet/dwefm.hpp"
#include "gmenet/losses.hpp"
#include "gmenet/param_store.hpp"
#include "gmenet/stem.hpp"

namespace gmenet {

// full: CGGM imputation + expert fusion. no_cggm: missing latents are
// zero-filled and no generator parameters exist. no_dwefm: fusion collapses
// to a linear layer on the concatenated latents.
enum class Variant { Full, NoCggm, NoDwefm };

const std::string& variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
  Index raw_dim = 64;
  Index d_model = 64;
  Index tokens = 8;
  int heads = 2;
  Index d_expert = 0;  // 0 picks d_model / 2
  Variant variant = Variant::Full;
  std::uint64_t init_seed = 1;

  Index token_dim() const { return d_model / tokens; }
  Index expert_dim() const { return d_expert > 0 ? d_expert : d_model / 2; }
  void validate() const;
};

// Linear fallback fusion used by the no_dwefm variant.
struct ConcatFusion {
  Param* w = nullptr;  // 2D x D
  Param* b = nullptr;
};

struct TaskHead {
  Param* w = nullptr;  // D x n_classes
  Param* b = nullptr;
};

// Parameter pointers index into `params`, whose nodes survive moves, so the
// model is movable but deliberately not copyable.
struct Model {
  ModelConfig cfg;
  ParamStore params;
  StemSeq stem_fl, stem_t1c;
  Cggm cggm;            // populated unless variant == NoCggm
  Dwefm dwefm;          // populated unless variant == NoDwefm
  ConcatFusion concat;  // populated only when variant == NoDwefm
  TaskHead head_idh, head_codel, head_path;

  Model() = default;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  bool has_cggm() const { return cfg.variant != Variant::NoCggm; }
  bool has_dwefm() const { return cfg.variant != Variant::NoDwefm; }
};

// Initialization draws are ordered stems -> generator -> fusion -> heads so
// variants that share a module at the same seed share its initial weights.
Model make_model(const ModelConfig& cfg);

struct ModelCache {
  bool fl_present = false, t1c_present = false;
  StemCache stem_fl, stem_t1c;  // valid for the present sides
  bool imputed = false;
  Sequence imputed_seq = Sequence::FL;
  CggmCache impute;
  RowVecX f_fl, f_t1c;  // latents entering fusion
  DwefmCache fusion;
  RowVecX concat_in;  // no_dwefm path
  RowVecX fused;
};

// Latent features for the present sequences only; the absent side stays
// empty. Used to feed generator pretraining through a fixed stem.
FeaturePair stem_latents(const Model& m, const SampleRecord& rec);

PredictionSet model_forward(const Model& m, const SampleRecord& rec,
                            ModelCache* cache = nullptr);

// Backward from per-task logit gradients; accumulates into parameter grads.
void model_backward(const Model& m, const TotalLossGrads& grads,
                    const ModelCache& cache);

// Enough split provenance to recompute the exact train/test partition the
// model was trained under.
struct ModelCheckpointInfo {
  std::string mode;  // fs | ms
  std::uint64_t split_seed = 0;
  int fold = -1;
  int n_folds = 5;
  double test_frac = 0.2;
  Center independent_center = Center::BRATS;
};

void save_model(const std::string& path, const Model& m,
                const ModelCheckpointInfo& info);
Model load_model(const std::string& path, ModelCheckpointInfo* info = nullptr);

}  // namespace gmenet
