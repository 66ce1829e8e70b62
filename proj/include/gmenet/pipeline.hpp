#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "gmenet/config.hpp"
#include "gmenet/data.hpp"
#include "gmenet/grad_check.hpp"
#include "gmenet/metrics.hpp"
#include "gmenet/model.hpp"

namespace gmenet {

struct RunConfig {
  Index d_model = 64;
  Index tokens = 8;
  int heads = 2;
  Index d_expert = 0;  // 0 picks d_model / 2
  int batch_size = 32;
  int pretrain_steps = 500;
  int train_steps = 1000;
  double lr = 1e-3;           // the paper-faithful 1e-6 stays selectable
  double pretrain_lr = 1e-3;
  double weight_decay = 0.01;
  double mask_prob = 0.5;
  int n_folds = 5;
  double test_frac = 0.2;
  Center independent_center = Center::BRATS;
  std::uint64_t split_seed = 0;  // 0 falls back to the dataset seed
  bool smooth_counts = false;
  std::uint64_t seed = 1;  // model init, batch order, pretraining masks

  void validate() const;
  ModelConfig model_config(Index raw_dim, Variant variant) const;
  std::uint64_t effective_split_seed(const Dataset& ds) const;
};

RunConfig run_config_from(const Config& cfg);
CohortConfig cohort_config_from(const Config& cfg);

std::vector<const SampleRecord*> records_by_id(
    const Dataset& ds, const std::vector<std::string>& ids);

struct PretrainResult {
  // Stems at their seed-determined init, generator pretrained; the model is
  // returned so callers can reuse the generator without a file round-trip.
  Model model;
  SplitPlan plan;
  std::vector<ReconLoss> curve;
};

// Phase one: self-supervised generator training on the complete training
// pool of `fold` (fold -1 = whole pool). Only generator parameters move; the
// stems stay at their initialization. A non-empty `out_ckpt` also writes the
// checkpoint plus `<out_ckpt>.curve.csv`.
PretrainResult pretrain_cggm(const Dataset& ds, const RunConfig& rc,
                             const std::string& out_ckpt = "", int fold = -1,
                             std::ostream* log = nullptr);

struct TrainOptions {
  Mode mode = Mode::MS;
  Variant variant = Variant::Full;
  int fold = -1;
  std::string generator_ckpt;             // phase-one artifact on disk ...
  const ParamStore* generator = nullptr;  // ... or in memory (pick one)
};

struct TrainResult {
  Model model;
  ModelCheckpointInfo info;
  SplitPlan plan;
  std::vector<double> curve;  // mean batch loss per step
};

// Phase two: supervised fine-tuning with the loaded generator frozen. The
// no_cggm variant rejects any generator source.
TrainResult train_model(const Dataset& ds, const RunConfig& rc,
                        const TrainOptions& opt, std::ostream* log = nullptr);

struct EvalResult {
  MetricsReport report;
  std::vector<std::string> ids;
  std::vector<PredictionSet> preds;
  std::vector<LabelSet> labels;
};

// Deterministic forward over complete-sequence test records.
EvalResult evaluate_model(const Model& m,
                          const std::vector<const SampleRecord*>& records);

void write_predictions_csv(std::ostream& out, const EvalResult& eval);

// Held-out imputation quality: per complete pair, each side is synthesized
// from the other and compared against its stem latent; both baselines use
// the same targets.
struct ImputationEval {
  double imputed_mse = 0.0;
  double zero_mse = 0.0;
  double mean_mse = 0.0;  // training-pool mean latent as the fill value
};

ImputationEval eval_imputation(const Model& m,
                               const std::vector<const SampleRecord*>& train,
                               const std::vector<const SampleRecord*>& held);

struct CvResult {
  std::vector<MetricsReport> internal_folds;
  std::vector<MetricsReport> independent_folds;
  MetricsReport internal_mean;
  MetricsReport independent_mean;
};

// Per fold: generator pretraining on that fold's complete pool, fine-tuning,
// evaluation on both test sets. Writes per-fold and mean rows when `out_csv`
// is non-empty.
CvResult cross_validate(const Dataset& ds, const RunConfig& rc, Mode mode,
                        const std::string& out_csv = "",
                        std::ostream* log = nullptr);

struct VariantEval {
  Variant variant = Variant::Full;
  MetricsReport internal;
  MetricsReport independent;
};

// Trains all three variants under identical seed/hyperparameters/data order
// in MS mode on the whole pool; full and no_dwefm share one pretrained
// generator. CSV rows: <variant>_<split> x task.
std::vector<VariantEval> run_ablation(const Dataset& ds, const RunConfig& rc,
                                      const std::string& out_csv = "",
                                      std::ostream* log = nullptr);

struct GradSuite {
  std::vector<std::pair<std::string, GradCheckReport>> cases;
  double max_rel_err = 0.0;

  bool pass(double tol) const { return max_rel_err < tol; }
};

// Finite differences through every composed path on a small configuration:
// supervised loss per variant (stems, generator imputation, fusion, balanced
// softmax) plus the generator's masked reconstruction objective.
GradSuite run_grad_suite();

}  // namespace gmenet
