#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gmenet/types.hpp"

namespace gmenet {

enum class Center { TCGA = 0, BRATS = 1, RJ = 2, XH = 3, TH = 4, HS = 5 };
constexpr int kNumCenters = 6;

const std::string& center_name(Center c);
Center center_from_name(const std::string& name);

enum class Idh { Wildtype = 0, Mutant = 1 };
enum class Codel { Intact = 0, Codeleted = 1 };
enum class Pathology { Oligodendroglioma = 0, Astrocytoma = 1, Glioblastoma = 2 };

struct LabelSet {
  Idh idh = Idh::Wildtype;
  Codel codel = Codel::Intact;
  Pathology pathology = Pathology::Glioblastoma;

  bool who_consistent() const;
};

// Deterministic WHO CNS5 mapping from pathology type to molecular markers.
LabelSet label_from_pathology(Pathology p);

struct SampleRecord {
  std::string id;
  Center center = Center::TCGA;
  std::optional<RowVecX> fl_raw;
  std::optional<RowVecX> t1c_raw;
  LabelSet labels;

  bool complete() const { return fl_raw.has_value() && t1c_raw.has_value(); }
};

struct CohortConfig {
  // Per-center totals; defaults mirror a 1,241-subject six-center cohort.
  std::array<int, kNumCenters> counts = {317, 160, 22, 12, 37, 693};
  // Per-center, per-sequence probability that the sequence is missing
  // (both-missing draws are rejected and redrawn).
  std::array<double, kNumCenters> miss_fl = {0.39, 0.0, 0.0, 0.0, 0.0, 0.467};
  std::array<double, kNumCenters> miss_t1c = {0.39, 0.0, 0.0, 0.0, 0.0, 0.467};
  // Pathology prior: oligodendroglioma, astrocytoma, glioblastoma.
  std::array<double, 3> class_prior = {0.15, 0.30, 0.55};
  double center_shift = 1.0;
  // The center playing the independent-test role gets a harsher imaging
  // protocol (scales its offsets and noise) to emulate cross-center
  // distribution change.
  Center independent_center = Center::BRATS;
  double independent_shift_boost = 3.0;
  double coupling = 0.85;     // shared-latent variance fraction in [0, 1]
  double class_sep = 0.6;     // scale of class-conditional view/mean offsets
  double noise = 0.55;        // per-sequence private noise stddev
  Index raw_dim = 64;
  std::uint64_t seed = 42;

  void validate() const;
};

struct Dataset {
  Index raw_dim = 0;
  int schema_version = 1;
  std::uint64_t seed = 0;
  std::vector<SampleRecord> records;
};

// Draws pathology from the prior, derives molecular labels, and emits two
// class-conditional affine views of a per-subject latent (plus center shift
// and Gaussian noise) so that each sequence carries signal about the other.
Dataset generate_cohort(const CohortConfig& cfg);

enum class Mode { FS, MS };

const std::string& mode_name(Mode m);
Mode mode_from_name(const std::string& name);

struct SplitPlan {
  std::vector<std::vector<std::string>> folds;  // complete-sequence ids only
  std::vector<std::string> internal_test;
  std::vector<std::string> independent_test;
  std::vector<std::string> incomplete_train;  // MS surplus, never in any test
  Center independent_center = Center::BRATS;
  std::vector<std::string> warnings;

  std::size_t fs_pool_size() const;
  std::size_t ms_pool_size() const;
  // Training ids for one fold (fold == -1 uses the whole pool).
  std::vector<std::string> train_ids(int fold, Mode mode) const;
};

// Holds out `independent_center` entirely; splits the remaining complete
// records 8:2 per center into a cross-validation pool and the internal test
// set; assigns the pool to `n_folds` folds stratified by center. Incomplete
// records from the remaining centers form the MS training surplus.
SplitPlan split_fig1e(const std::vector<SampleRecord>& records,
                      std::uint64_t seed,
                      Center independent_center = Center::BRATS,
                      int n_folds = 5, double test_frac = 0.2);

// Throws if partitions overlap, a test set contains an incomplete record, or
// a fold references an unknown id.
void validate_split(const SplitPlan& plan,
                    const std::vector<SampleRecord>& records);

void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace gmenet
